#ifndef PLNMA_SIMULATION_HPP
#define PLNMA_SIMULATION_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "plnma/netdata.hpp"
#include "plnma/overdispersion.hpp"
#include "plnma/stats.hpp"

namespace plnma {

enum class Method {
  pl_wald,
  pl_profile,
  pl_phi,
  mle,
  iv_common,
  iv_random,
};

std::string method_name(Method m);
std::optional<Method> parse_method(const std::string& name);
std::vector<Method> all_methods();

// Scenario parameters for the data-generating process: pairwise designs with
// a fixed number of studies per comparison, or all-arm multi-arm designs.
struct ScenarioConfig {
  int treatments = 5;
  int arm_size_min = 30;
  int arm_size_max = 60;
  bool multi_arm = false;
  int studies_per_comparison = 2;  // two-arm designs
  int studies_total = 0;           // multi-arm designs
  double tau = 0.0;
  double cgr_min = 0.03;           // control group risk range
  double cgr_max = 0.05;
  std::vector<double> true_logors;  // empty -> equal spacing over (0, 1]
  std::uint64_t seed = 0;
  int reps = 1000;
};

void validate_config(const ScenarioConfig& cfg);  // throws ConfigInvalid
std::vector<double> default_true_logors(int treatments);
std::vector<double> effective_true_logors(const ScenarioConfig& cfg);

// Key-value scenario file, one "key = value" per line, '#' comments.
ScenarioConfig load_scenario_file(const std::string& path);

// Deterministic in (cfg, rep_index): every (replication, study, arm) draw has
// its own seed-derived substream.
Network generate_dataset(const ScenarioConfig& cfg, int rep_index);

struct EstimandStats {
  std::string estimand;
  double mean_bias = 0.0;
  double coverage = 0.0;
  double mse = 0.0;
  double mean_ci_length = 0.0;
  double mc_se_bias = 0.0;
  int n_used = 0;
};

struct MethodReport {
  Method method = Method::pl_wald;
  std::vector<EstimandStats> per_estimand;
  EstimandStats aggregate;
  int convergence_failures = 0;
  double phi_gt1_fraction = 0.0;  // meaningful for pl-phi
};

struct ZeroStudySummary {
  stats::FiveNumber summary;
  double mean = 0.0;
  int reps = 0;
};

struct SimReport {
  ScenarioConfig config;
  std::vector<MethodReport> methods;
  ZeroStudySummary zero_profile;
};

struct SimOptions {
  std::vector<Method> methods;
  int threads = 1;
  double level = 0.95;
  DfMode df_mode = DfMode::paper;
};

SimReport run_scenario(const ScenarioConfig& cfg, const SimOptions& opts);

ZeroStudySummary zero_study_profile(const ScenarioConfig& cfg, int reps);

// Report emission: per-method per-estimand CSV rows and a JSON aggregate.
void write_report_csv(const SimReport& report, std::ostream& out);
std::string report_to_json(const SimReport& report);

}  // namespace plnma

#endif  // PLNMA_SIMULATION_HPP
