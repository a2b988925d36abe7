#include "plnma/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "plnma/design.hpp"
#include "plnma/errors.hpp"
#include "plnma/inference.hpp"
#include "plnma/ivcomparator.hpp"
#include "plnma/plfit.hpp"
#include "plnma/rng.hpp"

namespace plnma {

std::string method_name(Method m) {
  switch (m) {
    case Method::pl_wald: return "pl-wald";
    case Method::pl_profile: return "pl-profile";
    case Method::pl_phi: return "pl-phi";
    case Method::mle: return "mle";
    case Method::iv_common: return "iv-common";
    case Method::iv_random: return "iv-random";
  }
  return "?";
}

std::optional<Method> parse_method(const std::string& name) {
  for (Method m : all_methods()) {
    if (method_name(m) == name) return m;
  }
  return std::nullopt;
}

std::vector<Method> all_methods() {
  return {Method::pl_wald, Method::pl_profile, Method::pl_phi,
          Method::mle, Method::iv_common, Method::iv_random};
}

void validate_config(const ScenarioConfig& cfg) {
  if (cfg.treatments < 2) throw ConfigInvalid("treatments must be >= 2");
  if (cfg.arm_size_min < 1 || cfg.arm_size_max < cfg.arm_size_min) {
    throw ConfigInvalid("arm size range must satisfy 1 <= min <= max");
  }
  if (!(cfg.cgr_min > 0.0 && cfg.cgr_min <= cfg.cgr_max && cfg.cgr_max < 1.0)) {
    throw ConfigInvalid("control group risk range must satisfy 0 < min <= max < 1");
  }
  if (cfg.tau < 0.0) throw ConfigInvalid("tau must be >= 0");
  if (cfg.reps < 1) throw ConfigInvalid("reps must be >= 1");
  if (cfg.multi_arm) {
    if (cfg.studies_total < 1) {
      throw ConfigInvalid("multi-arm designs need studies_total >= 1");
    }
  } else if (cfg.studies_per_comparison < 1) {
    throw ConfigInvalid("two-arm designs need studies_per_comparison >= 1");
  }
  if (!cfg.true_logors.empty() &&
      static_cast<int>(cfg.true_logors.size()) != cfg.treatments - 1) {
    throw ConfigInvalid("true_logors must list exactly T-1 values");
  }
}

std::vector<double> default_true_logors(int treatments) {
  std::vector<double> d(static_cast<std::size_t>(treatments - 1));
  for (int k = 1; k < treatments; ++k) {
    d[static_cast<std::size_t>(k - 1)] =
        static_cast<double>(k) / static_cast<double>(treatments - 1);
  }
  return d;
}

std::vector<double> effective_true_logors(const ScenarioConfig& cfg) {
  return cfg.true_logors.empty() ? default_true_logors(cfg.treatments)
                                 : cfg.true_logors;
}

namespace {

std::string padded_number(int value, int width) {
  std::string s = std::to_string(value);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

int digits(int n) { return static_cast<int>(std::to_string(n).size()); }

// Substream purposes; one stream per (seed, rep, study, arm, tag).
enum : std::uint64_t { kArmSize = 1, kBaselineRisk = 2, kRandomEffect = 3, kEvents = 4 };

struct StudyPlan {
  std::vector<int> treatments;  // ascending treatment indices
};

std::vector<StudyPlan> study_plans(const ScenarioConfig& cfg) {
  std::vector<StudyPlan> plans;
  if (cfg.multi_arm) {
    std::vector<int> all(static_cast<std::size_t>(cfg.treatments));
    for (int t = 0; t < cfg.treatments; ++t) all[static_cast<std::size_t>(t)] = t;
    for (int s = 0; s < cfg.studies_total; ++s) plans.push_back({all});
  } else {
    for (int a = 0; a < cfg.treatments; ++a) {
      for (int b = a + 1; b < cfg.treatments; ++b) {
        for (int s = 0; s < cfg.studies_per_comparison; ++s) {
          plans.push_back({{a, b}});
        }
      }
    }
  }
  return plans;
}

}  // namespace

Network generate_dataset(const ScenarioConfig& cfg, int rep_index) {
  validate_config(cfg);
  const std::vector<double> logors = effective_true_logors(cfg);
  const auto plans = study_plans(cfg);

  const int t_width = digits(cfg.treatments);
  const int s_width = digits(static_cast<int>(plans.size()));
  auto treatment_label = [&](int t) { return padded_number(t + 1, t_width); };

  const auto rep = static_cast<std::uint64_t>(rep_index);
  std::vector<ArmRecord> records;
  for (std::size_t s = 0; s < plans.size(); ++s) {
    const auto sid = static_cast<std::uint64_t>(s);
    const std::string study_id = "S" + padded_number(static_cast<int>(s) + 1, s_width);

    rng::SplitMix64 size_rng(rng::substream({cfg.seed, rep, sid, 0, kArmSize}));
    const long long n = size_rng.uniform_int(cfg.arm_size_min, cfg.arm_size_max);

    rng::SplitMix64 risk_rng(rng::substream({cfg.seed, rep, sid, 0, kBaselineRisk}));
    const double p1 = risk_rng.uniform(cfg.cgr_min, cfg.cgr_max);
    const double odds1 = p1 / (1.0 - p1);

    for (int t : plans[s].treatments) {
      const auto arm = static_cast<std::uint64_t>(t);
      double p = p1;
      if (t != 0) {
        double delta = logors[static_cast<std::size_t>(t - 1)];
        if (cfg.tau > 0.0) {
          rng::SplitMix64 re_rng(
              rng::substream({cfg.seed, rep, sid, arm, kRandomEffect}));
          delta = re_rng.normal(delta, cfg.tau);
        }
        const double odds = odds1 * std::exp(delta);
        p = odds / (1.0 + odds);
        if (!(p > 0.0 && p < 1.0)) {
          throw std::logic_error("odds transform left (0,1)");
        }
      }
      rng::SplitMix64 ev_rng(rng::substream({cfg.seed, rep, sid, arm, kEvents}));
      const long long r = ev_rng.binomial(n, p);
      records.push_back({study_id, treatment_label(t), r, n});
    }
  }
  return validate(records, treatment_label(0));
}

namespace {

struct RepOutcome {
  bool failed = false;
  bool phi_gt1 = false;
  std::vector<double> estimate;
  std::vector<double> lo;
  std::vector<double> hi;
};

RepOutcome run_method_once(Method m, const Network& net, double level,
                           DfMode df_mode, int n_estimands) {
  RepOutcome out;
  out.estimate.resize(static_cast<std::size_t>(n_estimands));
  out.lo.resize(static_cast<std::size_t>(n_estimands));
  out.hi.resize(static_cast<std::size_t>(n_estimands));

  const int n_studies = net.num_studies();
  try {
    switch (m) {
      case Method::pl_wald:
      case Method::pl_profile:
      case Method::pl_phi: {
        const DesignMatrix dm = build(net);
        FitOptions opts;
        opts.penalized = true;
        const FitResult res = fit(net, dm, opts);
        if (!res.converged) {
          out.failed = true;
          return out;
        }
        double infl = 1.0;
        if (m == Method::pl_phi) {
          const PhiEstimate phi = fletcher_phi(net, res, df_mode);
          infl = std::sqrt(phi.phi);
          out.phi_gt1 = phi.phi > 1.0;
        }
        for (int k = 0; k < n_estimands; ++k) {
          const int j = n_studies + k;
          out.estimate[static_cast<std::size_t>(k)] = res.theta_hat(j);
          if (m == Method::pl_profile) {
            const Interval ci = profile_ci(net, dm, res, j, level);
            out.lo[static_cast<std::size_t>(k)] = ci.lo;
            out.hi[static_cast<std::size_t>(k)] = ci.hi;
          } else {
            Interval ci = wald_ci(res, j, level);
            if (infl > 1.0) {
              const double est = res.theta_hat(j);
              ci.lo = est - infl * (est - ci.lo);
              ci.hi = est + infl * (ci.hi - est);
            }
            out.lo[static_cast<std::size_t>(k)] = ci.lo;
            out.hi[static_cast<std::size_t>(k)] = ci.hi;
          }
        }
        return out;
      }
      case Method::mle: {
        FitOptions opts;
        opts.penalized = false;
        const FitResult res = fit(net, opts);
        if (!res.converged) {
          out.failed = true;
          return out;
        }
        for (int k = 0; k < n_estimands; ++k) {
          const int j = n_studies + k;
          const Interval ci = wald_ci(res, j, level);
          out.estimate[static_cast<std::size_t>(k)] = res.theta_hat(j);
          out.lo[static_cast<std::size_t>(k)] = ci.lo;
          out.hi[static_cast<std::size_t>(k)] = ci.hi;
        }
        return out;
      }
      case Method::iv_common:
      case Method::iv_random: {
        const GlsFit res = iv_fit(net, m == Method::iv_random);
        const double z = stats::normal_quantile(0.5 * (1.0 + level));
        for (int k = 0; k < n_estimands; ++k) {
          const double se = std::sqrt(res.cov(k, k));
          out.estimate[static_cast<std::size_t>(k)] = res.d_hat(k);
          out.lo[static_cast<std::size_t>(k)] = res.d_hat(k) - z * se;
          out.hi[static_cast<std::size_t>(k)] = res.d_hat(k) + z * se;
        }
        return out;
      }
    }
  } catch (const Error&) {
    out.failed = true;
    return out;
  }
  out.failed = true;
  return out;
}

EstimandStats summarize(const std::string& name,
                        const std::vector<double>& errors,
                        const std::vector<double>& covered,
                        const std::vector<double>& lengths) {
  EstimandStats s;
  s.estimand = name;
  s.n_used = static_cast<int>(errors.size());
  if (errors.empty()) return s;
  s.mean_bias = stats::mean(errors);
  s.coverage = stats::mean(covered);
  double sq = 0.0;
  for (double e : errors) sq += e * e;
  s.mse = sq / static_cast<double>(errors.size());
  s.mean_ci_length = stats::mean(lengths);
  if (errors.size() >= 2) {
    s.mc_se_bias = stats::sample_sd(errors) /
                   std::sqrt(static_cast<double>(errors.size()));
  }
  return s;
}

}  // namespace

SimReport run_scenario(const ScenarioConfig& cfg, const SimOptions& opts) {
  validate_config(cfg);
  if (opts.methods.empty()) throw ConfigInvalid("no methods selected");
  const std::vector<double> truth = effective_true_logors(cfg);
  const int n_estimands = static_cast<int>(truth.size());

  std::vector<std::vector<RepOutcome>> outcomes(
      opts.methods.size(), std::vector<RepOutcome>(static_cast<std::size_t>(cfg.reps)));
  std::vector<int> zero_counts(static_cast<std::size_t>(cfg.reps), 0);

  std::atomic<int> next{0};
  auto worker = [&] {
    for (;;) {
      const int rep = next.fetch_add(1);
      if (rep >= cfg.reps) return;
      const Network net = generate_dataset(cfg, rep);
      zero_counts[static_cast<std::size_t>(rep)] =
          static_cast<int>(all_zero_studies(net).size());
      for (std::size_t mi = 0; mi < opts.methods.size(); ++mi) {
        outcomes[mi][static_cast<std::size_t>(rep)] = run_method_once(
            opts.methods[mi], net, opts.level, opts.df_mode, n_estimands);
      }
    }
  };
  const int n_threads = std::max(1, opts.threads);
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  SimReport report;
  report.config = cfg;
  for (std::size_t mi = 0; mi < opts.methods.size(); ++mi) {
    MethodReport mr;
    mr.method = opts.methods[mi];

    std::vector<std::vector<double>> err(static_cast<std::size_t>(n_estimands));
    std::vector<std::vector<double>> cov(static_cast<std::size_t>(n_estimands));
    std::vector<std::vector<double>> len(static_cast<std::size_t>(n_estimands));
    std::vector<double> rep_mean_bias;
    std::vector<double> all_err, all_cov, all_len;
    int phi_gt1 = 0;
    int used = 0;

    for (const RepOutcome& o : outcomes[mi]) {
      if (o.failed) {
        ++mr.convergence_failures;
        continue;
      }
      ++used;
      if (o.phi_gt1) ++phi_gt1;
      double bias_sum = 0.0;
      for (int k = 0; k < n_estimands; ++k) {
        const auto ks = static_cast<std::size_t>(k);
        const double e = o.estimate[ks] - truth[ks];
        const double c =
            (o.lo[ks] <= truth[ks] && truth[ks] <= o.hi[ks]) ? 1.0 : 0.0;
        const double l = o.hi[ks] - o.lo[ks];
        err[ks].push_back(e);
        cov[ks].push_back(c);
        len[ks].push_back(l);
        all_err.push_back(e);
        all_cov.push_back(c);
        all_len.push_back(l);
        bias_sum += e;
      }
      rep_mean_bias.push_back(bias_sum / n_estimands);
    }

    for (int k = 0; k < n_estimands; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      mr.per_estimand.push_back(summarize("d[1:" + std::to_string(k + 2) + "]",
                                          err[ks], cov[ks], len[ks]));
    }
    mr.aggregate = summarize("all", all_err, all_cov, all_len);
    mr.aggregate.n_used = used;
    // MC noise of the headline bias: sd of per-replication mean bias.
    if (rep_mean_bias.size() >= 2) {
      mr.aggregate.mc_se_bias = stats::sample_sd(rep_mean_bias) /
                                std::sqrt(static_cast<double>(rep_mean_bias.size()));
    }
    mr.phi_gt1_fraction = used > 0 ? static_cast<double>(phi_gt1) / used : 0.0;
    report.methods.push_back(std::move(mr));
  }

  std::vector<double> zc(zero_counts.begin(), zero_counts.end());
  report.zero_profile.summary = stats::five_number(zc);
  report.zero_profile.mean = stats::mean(zc);
  report.zero_profile.reps = cfg.reps;
  return report;
}

ZeroStudySummary zero_study_profile(const ScenarioConfig& cfg, int reps) {
  validate_config(cfg);
  if (reps < 1) throw ConfigInvalid("reps must be >= 1");
  std::vector<double> counts;
  counts.reserve(static_cast<std::size_t>(reps));
  for (int rep = 0; rep < reps; ++rep) {
    const Network net = generate_dataset(cfg, rep);
    counts.push_back(static_cast<double>(all_zero_studies(net).size()));
  }
  ZeroStudySummary z;
  z.summary = stats::five_number(counts);
  z.mean = stats::mean(counts);
  z.reps = reps;
  return z;
}

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

nlohmann::json estimand_json(const EstimandStats& s) {
  return {{"estimand", s.estimand},
          {"mean_bias", s.mean_bias},
          {"coverage", s.coverage},
          {"mse", s.mse},
          {"mean_ci_length", s.mean_ci_length},
          {"mc_se_bias", s.mc_se_bias},
          {"n_used", s.n_used}};
}

}  // namespace

void write_report_csv(const SimReport& report, std::ostream& out) {
  out << "method,estimand,mean_bias,coverage,mse,mean_ci_length,mc_se_bias,"
         "n_used,n_failed\n";
  for (const MethodReport& mr : report.methods) {
    for (const EstimandStats& s : mr.per_estimand) {
      out << method_name(mr.method) << ',' << s.estimand << ','
          << fmt(s.mean_bias) << ',' << fmt(s.coverage) << ',' << fmt(s.mse)
          << ',' << fmt(s.mean_ci_length) << ',' << fmt(s.mc_se_bias) << ','
          << s.n_used << ',' << mr.convergence_failures << '\n';
    }
  }
}

std::string report_to_json(const SimReport& report) {
  const ScenarioConfig& c = report.config;
  nlohmann::json j;
  j["schema_version"] = 1;
  j["scenario"] = {{"treatments", c.treatments},
                   {"arm_size_min", c.arm_size_min},
                   {"arm_size_max", c.arm_size_max},
                   {"design", c.multi_arm ? "multi-arm" : "two-arm"},
                   {"studies_per_comparison", c.studies_per_comparison},
                   {"studies_total", c.studies_total},
                   {"tau", c.tau},
                   {"cgr_min", c.cgr_min},
                   {"cgr_max", c.cgr_max},
                   {"true_logors", effective_true_logors(c)},
                   {"seed", c.seed},
                   {"reps", c.reps}};
  j["methods"] = nlohmann::json::array();
  for (const MethodReport& mr : report.methods) {
    nlohmann::json m;
    m["method"] = method_name(mr.method);
    m["aggregate"] = estimand_json(mr.aggregate);
    m["per_estimand"] = nlohmann::json::array();
    for (const EstimandStats& s : mr.per_estimand) {
      m["per_estimand"].push_back(estimand_json(s));
    }
    m["convergence_failures"] = mr.convergence_failures;
    m["phi_gt1_fraction"] = mr.phi_gt1_fraction;
    j["methods"].push_back(std::move(m));
  }
  j["zero_study_profile"] = {{"min", report.zero_profile.summary.min},
                             {"q1", report.zero_profile.summary.q1},
                             {"median", report.zero_profile.summary.median},
                             {"q3", report.zero_profile.summary.q3},
                             {"max", report.zero_profile.summary.max},
                             {"mean", report.zero_profile.mean},
                             {"reps", report.zero_profile.reps}};
  return j.dump(2) + "\n";
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigInvalid("cannot parse number for '" + key + "': '" + v + "'");
  }
}

long long parse_int(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigInvalid("cannot parse integer for '" + key + "': '" + v + "'");
  }
}

}  // namespace

ScenarioConfig load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigInvalid("cannot open scenario file '" + path + "'");

  ScenarioConfig cfg;
  cfg.studies_per_comparison = 0;  // require explicit design fields
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigInvalid("scenario file line " + std::to_string(line_no) +
                          ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));

    if (key == "treatments") {
      cfg.treatments = static_cast<int>(parse_int(val, key));
    } else if (key == "arm_size_min") {
      cfg.arm_size_min = static_cast<int>(parse_int(val, key));
    } else if (key == "arm_size_max") {
      cfg.arm_size_max = static_cast<int>(parse_int(val, key));
    } else if (key == "design") {
      if (val == "two-arm") {
        cfg.multi_arm = false;
      } else if (val == "multi-arm") {
        cfg.multi_arm = true;
      } else {
        throw ConfigInvalid("design must be 'two-arm' or 'multi-arm'");
      }
    } else if (key == "studies_per_comparison") {
      cfg.studies_per_comparison = static_cast<int>(parse_int(val, key));
    } else if (key == "studies_total") {
      cfg.studies_total = static_cast<int>(parse_int(val, key));
    } else if (key == "tau") {
      cfg.tau = parse_double(val, key);
    } else if (key == "cgr_min") {
      cfg.cgr_min = parse_double(val, key);
    } else if (key == "cgr_max") {
      cfg.cgr_max = parse_double(val, key);
    } else if (key == "true_logors") {
      cfg.true_logors.clear();
      std::stringstream ss(val);
      std::string item;
      while (std::getline(ss, item, ',')) {
        cfg.true_logors.push_back(parse_double(trim(item), key));
      }
    } else if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(parse_int(val, key));
    } else if (key == "reps") {
      cfg.reps = static_cast<int>(parse_int(val, key));
    } else {
      throw ConfigInvalid("unknown scenario key '" + key + "'");
    }
  }
  validate_config(cfg);
  return cfg;
}

}  // namespace plnma
