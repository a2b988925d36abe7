#ifndef PLNMA_CLI_HPP
#define PLNMA_CLI_HPP

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "plnma/inference.hpp"

namespace plnma {

// Rendered result of one dataset analysis; serializes losslessly to JSON.
struct FitReportDocument {
  int schema_version = 1;
  std::string method;        // pl | mle | iv-common | iv-random
  std::string reference;
  std::string ci_kind;       // wald | profile
  double level = 0.95;

  bool phi_applied = false;
  double phi = 1.0;
  double phi_raw = 0.0;
  std::string phi_df_mode = "paper";
  std::string phi_note;

  bool converged = false;
  int iterations = 0;
  double max_abs_score = 0.0;
  double loglik = 0.0;
  double penalized_loglik = 0.0;

  int input_rows = 0;
  int n_studies = 0;
  int n_treatments = 0;
  int zero_event_arms = 0;
  int all_zero_study_count = 0;
  bool included_all_zero = true;
  std::string all_zero_note;

  std::vector<ContrastRow> vs_reference;
  std::vector<ContrastRow> league;
};

std::string report_to_json(const FitReportDocument& doc);
FitReportDocument report_from_json(const std::string& text);
void report_to_csv(const FitReportDocument& doc, std::ostream& out);
void report_to_table(const FitReportDocument& doc, std::ostream& out);

// Entry point used by the binary and by tests; returns the process exit code.
// Exit codes: 0 ok, 2 parse, 3 validation, 4 disconnection, 5 convergence,
// 1 anything else.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace plnma

#endif  // PLNMA_CLI_HPP
