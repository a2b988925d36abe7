#ifndef PLNMA_IVCOMPARATOR_HPP
#define PLNMA_IVCOMPARATOR_HPP

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "plnma/netdata.hpp"

namespace plnma {

// Per-study contrasts versus the study baseline arm for the inverse-variance
// comparator, with the all-arm 0.5 correction applied when any cell is zero.
struct StudyContrastBlock {
  std::string study_id;
  int baseline = 0;                // treatment index of the baseline arm
  std::vector<int> arms;           // treatment indices of the non-baseline arms
  Eigen::VectorXd y;               // logORs versus baseline
  Eigen::MatrixXd V;               // within-study covariance
  bool corrected = false;
};

// nullopt means the study is excluded (zero events in every arm).
std::optional<StudyContrastBlock> study_contrasts(const Study& study,
                                                  const Network& net);

struct GlsFit {
  Eigen::VectorXd d_hat;   // T-1 basic parameters, treatment label order
  Eigen::MatrixXd cov;
  double tau2 = 0.0;
  int blocks_used = 0;
  int excluded_studies = 0;
};

// Common-effect GLS over the stacked study blocks; throws
// DisconnectedAfterExclusion when the retained studies do not connect the
// full treatment set.
GlsFit gls_fit(const std::vector<StudyContrastBlock>& blocks, const Network& net);

// Generalized DerSimonian-Laird moment estimate of tau^2 from the
// common-effect fit residuals.
double dl_tau2(const std::vector<StudyContrastBlock>& blocks, const Network& net,
               const GlsFit& common);

// Full comparator: build blocks, fit; with random_effects, estimate tau^2 and
// refit with V + tau^2 (diagonal) and tau^2/2 (off-diagonal) added per block.
GlsFit iv_fit(const Network& net, bool random_effects);

}  // namespace plnma

#endif  // PLNMA_IVCOMPARATOR_HPP
