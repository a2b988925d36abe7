#ifndef PLNMA_PLFIT_HPP
#define PLNMA_PLFIT_HPP

#include <Eigen/Core>

#include "plnma/design.hpp"
#include "plnma/netdata.hpp"

namespace plnma {

struct FitOptions {
  bool penalized = true;    // Firth-penalized likelihood vs plain MLE
  int max_iter = 100;
  double score_tol = 1e-6;  // max-abs (modified) score at convergence
  double step_tol = 1e-8;   // max-abs accepted parameter change
  int step_halving_max = 20;
  double separation_threshold = 50.0;  // log-odds scale, unpenalized only
};

// Tightened tolerances for oracle-grade comparisons and invariance checks.
FitOptions tight_options(bool penalized = true);

struct FitResult {
  Eigen::VectorXd theta_hat;    // N study intercepts, then T-1 basic params
  Eigen::MatrixXd cov;          // (Z'WZ)^-1 at theta_hat
  double loglik = 0.0;
  double penalized_loglik = 0.0;  // equals loglik for unpenalized fits
  Eigen::VectorXd p_hat;        // fitted per-arm event probabilities
  bool converged = false;
  int iterations = 0;
  bool penalized = true;
  double max_abs_score = 0.0;   // of the fit's own score at theta_hat
};

// Binomial log-likelihood including the log binomial coefficient term.
double log_likelihood(const DesignMatrix& dm, const Eigen::VectorXd& theta);

// Z'WZ with W = diag{n p (1-p)} at theta.
Eigen::MatrixXd fisher_information(const DesignMatrix& dm,
                                   const Eigen::VectorXd& theta);

// log_likelihood + 0.5 log det(Z'WZ); throws SingularInformation when the
// information matrix is not positive definite at theta.
double penalized_log_likelihood(const DesignMatrix& dm,
                                const Eigen::VectorXd& theta);

// Firth's modified score: Z'(r - n p + h (1/2 - p)) with h the hat diagonal
// of W^(1/2) Z (Z'WZ)^-1 Z' W^(1/2). With penalized=false the h term drops.
Eigen::VectorXd modified_score(const DesignMatrix& dm,
                               const Eigen::VectorXd& theta,
                               bool penalized = true);

FitResult fit(const Network& net, const DesignMatrix& dm,
              const FitOptions& opts = {});
FitResult fit(const Network& net, const FitOptions& opts = {});

// Maximize the penalized log-likelihood over all parameters except
// fixed_index, held at fixed_value. Used by profile intervals. The returned
// value is -inf when the likelihood cannot be evaluated at this slice.
struct ConstrainedFit {
  Eigen::VectorXd theta;
  double penalized_loglik = 0.0;
  bool converged = false;
};

ConstrainedFit fit_with_fixed(const DesignMatrix& dm, int fixed_index,
                              double fixed_value,
                              const Eigen::VectorXd& start,
                              const FitOptions& opts = {});

}  // namespace plnma

#endif  // PLNMA_PLFIT_HPP
