#ifndef PLNMA_INFERENCE_HPP
#define PLNMA_INFERENCE_HPP

#include <string>
#include <utility>
#include <vector>

#include "plnma/design.hpp"
#include "plnma/netdata.hpp"
#include "plnma/plfit.hpp"

namespace plnma {

enum class CiKind { wald, profile };

std::string ci_kind_name(CiKind kind);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool covers(double x) const { return lo <= x && x <= hi; }
  double length() const { return hi - lo; }
};

struct ContrastRow {
  std::string t1;  // comparator
  std::string t2;  // estimate is logOR of t2 versus t1
  double estimate = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  CiKind ci_kind = CiKind::wald;
  double phi_applied = 1.0;
};

// All pairwise logOR contrasts; rows stored for canonical pairs t1 < t2,
// lookups in either order (antisymmetric by construction).
class ContrastTable {
 public:
  explicit ContrastTable(std::vector<ContrastRow> rows) : rows_(std::move(rows)) {}

  const std::vector<ContrastRow>& rows() const { return rows_; }
  ContrastRow row(const std::string& t1, const std::string& t2) const;

 private:
  std::vector<ContrastRow> rows_;
};

// theta_hat[j] +/- z * sqrt(cov[j,j]); throws NotConvergedFit.
Interval wald_ci(const FitResult& fit, int param_index, double level = 0.95);

// (estimate, se) of the logOR of t2 versus t1 via consistency.
std::pair<double, double> contrast(const Network& net, const FitResult& fit,
                                   const std::string& t1, const std::string& t2);

// Profile-likelihood interval for one parameter: the two roots of
// 2 (l*_max - l*_profile(x)) = chi^2_{1,level}, found by bracketed bisection
// from theta +/- 10 se with up to 4 bracket doublings, tolerance 1e-4.
Interval profile_ci(const Network& net, const DesignMatrix& dm,
                    const FitResult& fit, int param_index, double level = 0.95,
                    const FitOptions& opts = {});

// Profile interval for an arbitrary pair: basic parameters are profiled
// directly; other pairs are profiled after refitting with t1 as reference.
Interval profile_contrast(const Network& net, const DesignMatrix& dm,
                          const FitResult& fit, const std::string& t1,
                          const std::string& t2, double level = 0.95,
                          const FitOptions& opts = {});

// Full pairwise table. For Wald intervals with phi > 1 the SEs are inflated
// by sqrt(phi); profile intervals are reported unscaled (phi recorded only).
ContrastTable league_table(const Network& net, const DesignMatrix& dm,
                           const FitResult& fit, CiKind kind,
                           double level = 0.95, double phi = 1.0,
                           const FitOptions& opts = {});

}  // namespace plnma

#endif  // PLNMA_INFERENCE_HPP
