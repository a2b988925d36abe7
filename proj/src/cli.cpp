#include "plnma/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "plnma/design.hpp"
#include "plnma/errors.hpp"
#include "plnma/ivcomparator.hpp"
#include "plnma/netdata.hpp"
#include "plnma/overdispersion.hpp"
#include "plnma/plfit.hpp"
#include "plnma/simulation.hpp"
#include "plnma/stats.hpp"

namespace plnma {

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string fmt4(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.4f", x);
  return buf;
}

nlohmann::json row_to_json(const ContrastRow& r) {
  return {{"t1", r.t1},
          {"t2", r.t2},
          {"contrast", r.t2 + " vs " + r.t1},
          {"estimate", r.estimate},
          {"se", r.se},
          {"ci_low", r.ci_low},
          {"ci_high", r.ci_high},
          {"ci_kind", ci_kind_name(r.ci_kind)},
          {"phi", r.phi_applied}};
}

ContrastRow row_from_json(const nlohmann::json& j) {
  ContrastRow r;
  r.t1 = j.at("t1").get<std::string>();
  r.t2 = j.at("t2").get<std::string>();
  r.estimate = j.at("estimate").get<double>();
  r.se = j.at("se").get<double>();
  r.ci_low = j.at("ci_low").get<double>();
  r.ci_high = j.at("ci_high").get<double>();
  r.ci_kind = j.at("ci_kind").get<std::string>() == "profile" ? CiKind::profile
                                                              : CiKind::wald;
  r.phi_applied = j.at("phi").get<double>();
  return r;
}

}  // namespace

std::string report_to_json(const FitReportDocument& doc) {
  nlohmann::json j;
  j["schema_version"] = doc.schema_version;
  j["method"] = doc.method;
  j["reference"] = doc.reference;
  j["ci_kind"] = doc.ci_kind;
  j["level"] = doc.level;
  j["phi"] = {{"applied", doc.phi_applied},
              {"value", doc.phi},
              {"raw", doc.phi_raw},
              {"df_mode", doc.phi_df_mode},
              {"note", doc.phi_note}};
  j["convergence"] = {{"converged", doc.converged},
                      {"iterations", doc.iterations},
                      {"max_abs_score", doc.max_abs_score},
                      {"loglik", doc.loglik},
                      {"penalized_loglik", doc.penalized_loglik}};
  j["input"] = {{"rows", doc.input_rows},
                {"studies", doc.n_studies},
                {"treatments", doc.n_treatments},
                {"zero_event_arms", doc.zero_event_arms},
                {"all_zero_studies", doc.all_zero_study_count},
                {"included_all_zero", doc.included_all_zero},
                {"note", doc.all_zero_note}};
  j["vs_reference"] = nlohmann::json::array();
  for (const auto& r : doc.vs_reference) j["vs_reference"].push_back(row_to_json(r));
  j["league"] = nlohmann::json::array();
  for (const auto& r : doc.league) j["league"].push_back(row_to_json(r));
  return j.dump(2) + "\n";
}

FitReportDocument report_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  FitReportDocument doc;
  doc.schema_version = j.at("schema_version").get<int>();
  doc.method = j.at("method").get<std::string>();
  doc.reference = j.at("reference").get<std::string>();
  doc.ci_kind = j.at("ci_kind").get<std::string>();
  doc.level = j.at("level").get<double>();
  doc.phi_applied = j.at("phi").at("applied").get<bool>();
  doc.phi = j.at("phi").at("value").get<double>();
  doc.phi_raw = j.at("phi").at("raw").get<double>();
  doc.phi_df_mode = j.at("phi").at("df_mode").get<std::string>();
  doc.phi_note = j.at("phi").at("note").get<std::string>();
  doc.converged = j.at("convergence").at("converged").get<bool>();
  doc.iterations = j.at("convergence").at("iterations").get<int>();
  doc.max_abs_score = j.at("convergence").at("max_abs_score").get<double>();
  doc.loglik = j.at("convergence").at("loglik").get<double>();
  doc.penalized_loglik = j.at("convergence").at("penalized_loglik").get<double>();
  doc.input_rows = j.at("input").at("rows").get<int>();
  doc.n_studies = j.at("input").at("studies").get<int>();
  doc.n_treatments = j.at("input").at("treatments").get<int>();
  doc.zero_event_arms = j.at("input").at("zero_event_arms").get<int>();
  doc.all_zero_study_count = j.at("input").at("all_zero_studies").get<int>();
  doc.included_all_zero = j.at("input").at("included_all_zero").get<bool>();
  doc.all_zero_note = j.at("input").at("note").get<std::string>();
  for (const auto& r : j.at("vs_reference")) doc.vs_reference.push_back(row_from_json(r));
  for (const auto& r : j.at("league")) doc.league.push_back(row_from_json(r));
  return doc;
}

void report_to_csv(const FitReportDocument& doc, std::ostream& out) {
  out << "method,contrast,estimate,se,ci_low,ci_high,ci_kind,phi\n";
  for (const auto& r : doc.league) {
    out << doc.method << ',' << r.t2 << " vs " << r.t1 << ',' << fmt(r.estimate)
        << ',' << fmt(r.se) << ',' << fmt(r.ci_low) << ',' << fmt(r.ci_high)
        << ',' << ci_kind_name(r.ci_kind) << ',' << fmt(r.phi_applied) << '\n';
  }
}

void report_to_table(const FitReportDocument& doc, std::ostream& out) {
  out << "method: " << doc.method << "   reference: " << doc.reference
      << "   ci: " << doc.ci_kind << "   level: " << doc.level << "\n";
  out << "studies: " << doc.n_studies << "   treatments: " << doc.n_treatments
      << "   arms: " << doc.input_rows
      << "   all-zero studies: " << doc.all_zero_study_count << "\n";
  if (!doc.all_zero_note.empty()) out << "note: " << doc.all_zero_note << "\n";
  if (doc.method == "pl" || doc.method == "mle") {
    out << "converged: " << (doc.converged ? "yes" : "no")
        << "   iterations: " << doc.iterations
        << "   log-likelihood: " << fmt4(doc.loglik) << "\n";
  }
  if (doc.phi_applied) {
    out << "phi: " << fmt4(doc.phi) << " (raw " << fmt4(doc.phi_raw) << ", df "
        << doc.phi_df_mode << ")";
    if (!doc.phi_note.empty()) out << "   " << doc.phi_note;
    out << "\n";
  }
  out << "\ncontrast            estimate        se    ci_low   ci_high\n";
  for (const auto& r : doc.league) {
    std::string name = r.t2 + " vs " + r.t1;
    name.resize(18, ' ');
    out << name << ' ' << fmt4(r.estimate) << "  " << fmt4(r.se) << "  "
        << fmt4(r.ci_low) << "  " << fmt4(r.ci_high) << '\n';
  }
}

namespace {

struct FitArgs {
  std::string data_path;
  std::string method = "pl";
  std::string ci = "wald";
  double level = 0.95;
  std::string ref;
  std::string phi = "default";
  std::string df_mode = "paper";
  std::string include_all_zero = "default";
  std::string format = "table";
  std::string out_path;
  std::uint64_t seed = 0;  // accepted, ignored: fits are deterministic
};

void add_fit_flags(CLI::App* cmd, FitArgs& a) {
  cmd->add_option("data", a.data_path, "arm-level CSV (study,treatment,events,n)")
      ->required();
  cmd->add_option("--method", a.method, "pl | mle | iv-common | iv-random")
      ->check(CLI::IsMember({"pl", "mle", "iv-common", "iv-random"}));
  cmd->add_option("--ci", a.ci, "wald | profile")
      ->check(CLI::IsMember({"wald", "profile"}));
  cmd->add_option("--level", a.level, "confidence level (default 0.95)");
  cmd->add_option("--ref", a.ref, "reference treatment label");
  cmd->add_option("--phi", a.phi, "overdispersion: on | off")
      ->check(CLI::IsMember({"on", "off", "default"}));
  cmd->add_option("--df-mode", a.df_mode, "phi degrees of freedom: paper | residual")
      ->check(CLI::IsMember({"paper", "residual"}));
  cmd->add_option("--include-all-zero", a.include_all_zero,
                  "include studies with zero events in every arm: yes | no")
      ->check(CLI::IsMember({"yes", "no", "default"}));
  cmd->add_option("--format", a.format, "table | csv | json")
      ->check(CLI::IsMember({"table", "csv", "json"}));
  cmd->add_option("--out", a.out_path, "write the report to a file");
  cmd->add_option("--seed", a.seed, "ignored; fits are deterministic");
}

std::vector<ArmRecord> load_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return read_arm_csv(in);
}

FitReportDocument analyze(const FitArgs& a) {
  if (a.level <= 0.0 || a.level >= 1.0) {
    throw ValidationError("--level must lie in (0,1)");
  }
  const bool is_iv = a.method == "iv-common" || a.method == "iv-random";
  const bool is_pl = a.method == "pl";
  if (a.ci == "profile" && !is_pl) {
    throw ValidationError("profile intervals are available for --method pl only");
  }
  const bool phi_on = a.phi == "on" || (a.phi == "default" && is_pl);
  if (phi_on && is_iv) {
    throw ValidationError("--phi applies to likelihood fits (pl, mle) only");
  }
  bool include_all_zero = a.include_all_zero != "no";
  std::string zero_note;
  if (is_iv) {
    if (a.include_all_zero == "yes") {
      throw ValidationError(
          "inverse-variance models cannot use all-zero studies; "
          "--include-all-zero yes is unavailable");
    }
    include_all_zero = false;
    zero_note = "all-zero studies are always excluded by inverse-variance models";
  }

  const auto records = load_records(a.data_path);
  Network net = a.ref.empty() ? validate(records)
                              : validate(records, a.ref);
  const int all_zero = static_cast<int>(all_zero_studies(net).size());
  const int zero_arms = zero_event_arm_count(net);
  const int input_rows = net.arm_total();

  FitReportDocument doc;
  doc.method = a.method;
  doc.reference = net.reference_label();
  doc.ci_kind = a.ci;
  doc.level = a.level;
  doc.input_rows = input_rows;
  doc.zero_event_arms = zero_arms;
  doc.all_zero_study_count = all_zero;
  doc.included_all_zero = include_all_zero;
  doc.all_zero_note = zero_note;
  doc.phi_df_mode = a.df_mode;

  if (is_iv) {
    doc.n_studies = net.num_studies();
    doc.n_treatments = net.num_treatments();
    const GlsFit gls = iv_fit(net, a.method == "iv-random");
    doc.converged = true;
    const double z = stats::normal_quantile(0.5 * (1.0 + a.level));
    std::vector<ContrastRow> league;
    for (int i = 0; i < net.num_treatments(); ++i) {
      for (int j = i + 1; j < net.num_treatments(); ++j) {
        ContrastRow r;
        r.t1 = net.treatment_label(i);
        r.t2 = net.treatment_label(j);
        const int c1 = net.basic_param_column(i);
        const int c2 = net.basic_param_column(j);
        const int k1 = c1 < 0 ? -1 : c1 - net.num_studies();
        const int k2 = c2 < 0 ? -1 : c2 - net.num_studies();
        double est = 0.0, var = 0.0;
        if (k2 >= 0) { est += gls.d_hat(k2); var += gls.cov(k2, k2); }
        if (k1 >= 0) { est -= gls.d_hat(k1); var += gls.cov(k1, k1); }
        if (k1 >= 0 && k2 >= 0) var -= 2.0 * gls.cov(k1, k2);
        r.estimate = est;
        r.se = std::sqrt(var);
        r.ci_low = est - z * r.se;
        r.ci_high = est + z * r.se;
        league.push_back(r);
      }
    }
    doc.league = league;
    for (const auto& r : league) {
      if (r.t1 == doc.reference || r.t2 == doc.reference) {
        doc.vs_reference.push_back(ContrastTable(league).row(doc.reference,
                                                             r.t1 == doc.reference
                                                                 ? r.t2
                                                                 : r.t1));
      }
    }
    if (gls.excluded_studies > 0) {
      doc.all_zero_note = std::to_string(gls.excluded_studies) +
                          " all-zero studies excluded; " + zero_note;
    }
    return doc;
  }

  if (!include_all_zero) {
    net = drop_all_zero_studies(net);
    doc.all_zero_note = std::to_string(all_zero) +
                        " all-zero studies excluded on request";
  }
  doc.n_studies = net.num_studies();
  doc.n_treatments = net.num_treatments();

  const DesignMatrix dm = build(net);
  FitOptions opts;
  opts.penalized = is_pl;
  const FitResult res = fit(net, dm, opts);
  doc.converged = res.converged;
  doc.iterations = res.iterations;
  doc.max_abs_score = res.max_abs_score;
  doc.loglik = res.loglik;
  doc.penalized_loglik = res.penalized_loglik;
  if (!res.converged) {
    throw NotConvergedFit("fit did not converge in " +
                          std::to_string(res.iterations) + " iterations");
  }

  double phi_value = 1.0;
  if (phi_on) {
    const DfMode mode = a.df_mode == "residual" ? DfMode::residual : DfMode::paper;
    const PhiEstimate phi = fletcher_phi(net, res, mode);
    doc.phi_applied = true;
    doc.phi = phi.phi;
    doc.phi_raw = phi.phi_raw;
    phi_value = phi.phi;
    if (phi.negative_denominator) {
      doc.phi_note = "Fletcher denominator 1 + s_bar was non-positive; phi set to 1";
    }
    if (a.ci == "profile") {
      doc.phi_note = (doc.phi_note.empty() ? std::string() : doc.phi_note + "; ") +
                     "profile intervals are not phi-inflated";
    }
  }

  const CiKind kind = a.ci == "profile" ? CiKind::profile : CiKind::wald;
  const double applied_phi = kind == CiKind::wald ? phi_value : 1.0;
  ContrastTable table = league_table(net, dm, res, kind, a.level, applied_phi);
  doc.league = table.rows();
  for (int t = 0; t < net.num_treatments(); ++t) {
    if (t == net.reference()) continue;
    doc.vs_reference.push_back(table.row(doc.reference, net.treatment_label(t)));
  }
  return doc;
}

void emit(const FitReportDocument& doc, const FitArgs& a, std::ostream& out) {
  std::ostringstream buf;
  if (a.format == "json") {
    buf << report_to_json(doc);
  } else if (a.format == "csv") {
    report_to_csv(doc, buf);
  } else {
    report_to_table(doc, buf);
  }
  if (a.out_path.empty()) {
    out << buf.str();
  } else {
    std::ofstream f(a.out_path);
    if (!f) throw ParseError("cannot write '" + a.out_path + "'");
    f << buf.str();
  }
}

int exit_code_for(const Error& e) {
  if (e.category() == "parse") return 2;
  if (e.category() == "validation") return 3;
  if (e.category() == "disconnection") return 4;
  if (e.category() == "convergence") return 5;
  return 1;
}

struct SimulateArgs {
  std::string scenario_path;
  std::optional<int> reps;
  std::optional<std::uint64_t> seed;
  std::string methods = "pl-wald";
  std::string out_dir;
  int threads = 1;
  double level = 0.95;
  std::string df_mode = "paper";
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  ScenarioConfig cfg = load_scenario_file(a.scenario_path);
  if (a.reps) cfg.reps = *a.reps;
  if (a.seed) cfg.seed = *a.seed;
  validate_config(cfg);

  SimOptions opts;
  opts.threads = a.threads;
  opts.level = a.level;
  opts.df_mode = a.df_mode == "residual" ? DfMode::residual : DfMode::paper;
  std::stringstream ms(a.methods);
  std::string item;
  while (std::getline(ms, item, ',')) {
    const auto m = parse_method(item);
    if (!m) throw ConfigInvalid("unknown method '" + item + "'");
    opts.methods.push_back(*m);
  }

  const SimReport report = run_scenario(cfg, opts);

  namespace fs = std::filesystem;
  fs::create_directories(a.out_dir);
  {
    std::ofstream f(fs::path(a.out_dir) / "per_estimand.csv");
    if (!f) throw ParseError("cannot write into '" + a.out_dir + "'");
    write_report_csv(report, f);
  }
  {
    std::ofstream f(fs::path(a.out_dir) / "aggregate.json");
    if (!f) throw ParseError("cannot write into '" + a.out_dir + "'");
    f << report_to_json(report);
  }

  out << "scenario: " << a.scenario_path << "  reps: " << cfg.reps
      << "  seed: " << cfg.seed << "\n";
  out << "method        mean_bias  coverage      mse  mean_ci_len  mc_se  fails\n";
  for (const MethodReport& mr : report.methods) {
    std::string name = method_name(mr.method);
    name.resize(12, ' ');
    out << name << "  " << fmt4(mr.aggregate.mean_bias) << "     "
        << fmt4(mr.aggregate.coverage) << "  " << fmt4(mr.aggregate.mse) << "  "
        << fmt4(mr.aggregate.mean_ci_length) << "  " << fmt4(mr.aggregate.mc_se_bias)
        << "  " << mr.convergence_failures << "\n";
  }
  const auto& z = report.zero_profile.summary;
  out << "all-zero studies per dataset (min/q1/median/q3/max): " << z.min << "/"
      << z.q1 << "/" << z.median << "/" << z.q3 << "/" << z.max << "\n";
  out << "reports written to " << a.out_dir << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Penalized-likelihood network meta-analysis for rare binary events"};
  app.require_subcommand(1);

  FitArgs fit_args;
  CLI::App* fit_cmd = app.add_subcommand("fit", "fit one dataset and report all contrasts");
  add_fit_flags(fit_cmd, fit_args);

  FitArgs con_args;
  std::string pair;
  CLI::App* con_cmd = app.add_subcommand("contrast", "report a single contrast");
  add_fit_flags(con_cmd, con_args);
  con_cmd->add_option("--pair", pair, "t1,t2 : logOR of t2 versus t1")->required();

  SimulateArgs sim_args;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "run a simulation scenario");
  sim_cmd->add_option("--scenario", sim_args.scenario_path, "scenario config file")
      ->required();
  sim_cmd->add_option("--reps", sim_args.reps, "override replication count");
  sim_cmd->add_option("--seed", sim_args.seed, "override RNG seed");
  sim_cmd->add_option("--methods", sim_args.methods,
                      "comma list: pl-wald,pl-profile,pl-phi,mle,iv-common,iv-random");
  sim_cmd->add_option("--out", sim_args.out_dir, "output directory")->required();
  sim_cmd->add_option("--threads", sim_args.threads, "worker threads");
  sim_cmd->add_option("--level", sim_args.level, "confidence level");
  sim_cmd->add_option("--df-mode", sim_args.df_mode, "phi df mode: paper | residual")
      ->check(CLI::IsMember({"paper", "residual"}));

  std::vector<std::string> argv(args.rbegin(), args.rend());  // CLI11 wants reversed
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "error[parse]: " << e.what() << "\n";
    return 2;
  }

  try {
    if (fit_cmd->parsed()) {
      const FitReportDocument doc = analyze(fit_args);
      emit(doc, fit_args, out);
      return 0;
    }
    if (con_cmd->parsed()) {
      const auto comma = pair.find(',');
      if (comma == std::string::npos) {
        throw ValidationError("--pair expects 't1,t2'");
      }
      const std::string t1 = pair.substr(0, comma);
      const std::string t2 = pair.substr(comma + 1);
      FitReportDocument doc = analyze(con_args);
      ContrastRow row;
      if (t1 == t2) {
        const bool known = std::any_of(
            doc.league.begin(), doc.league.end(),
            [&](const ContrastRow& r) { return r.t1 == t1 || r.t2 == t1; });
        if (!known) throw UnknownTreatment("unknown treatment '" + t1 + "'");
        row = ContrastRow{t1, t2, 0.0, 0.0, 0.0, 0.0,
                          con_args.ci == "profile" ? CiKind::profile : CiKind::wald,
                          1.0};
      } else {
        row = ContrastTable(doc.league).row(t1, t2);
      }
      doc.league = {row};
      doc.vs_reference.clear();
      emit(doc, con_args, out);
      return 0;
    }
    if (sim_cmd->parsed()) {
      return cmd_simulate(sim_args, out);
    }
  } catch (const Error& e) {
    err << "error[" << e.category() << "]: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error[internal]: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace plnma
