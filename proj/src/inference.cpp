#include "plnma/inference.hpp"

#include <cmath>
#include <limits>

#include "plnma/errors.hpp"
#include "plnma/stats.hpp"

namespace plnma {

std::string ci_kind_name(CiKind kind) {
  return kind == CiKind::wald ? "wald" : "profile";
}

ContrastRow ContrastTable::row(const std::string& t1, const std::string& t2) const {
  for (const ContrastRow& r : rows_) {
    if (r.t1 == t1 && r.t2 == t2) return r;
    if (r.t1 == t2 && r.t2 == t1) {
      ContrastRow flipped = r;
      flipped.t1 = t1;
      flipped.t2 = t2;
      flipped.estimate = -r.estimate;
      flipped.ci_low = -r.ci_high;
      flipped.ci_high = -r.ci_low;
      return flipped;
    }
  }
  throw UnknownTreatment("no contrast row for (" + t1 + ", " + t2 + ")");
}

Interval wald_ci(const FitResult& fit, int param_index, double level) {
  if (!fit.converged) {
    throw NotConvergedFit("Wald interval requested from a non-converged fit");
  }
  const double z = stats::normal_quantile(0.5 * (1.0 + level));
  const double se = std::sqrt(fit.cov(param_index, param_index));
  const double est = fit.theta_hat(param_index);
  return {est - z * se, est + z * se};
}

std::pair<double, double> contrast(const Network& net, const FitResult& fit,
                                   const std::string& t1, const std::string& t2) {
  const int i1 = net.treatment_index(t1);
  const int i2 = net.treatment_index(t2);
  if (i1 == i2) return {0.0, 0.0};

  const int c1 = net.basic_param_column(i1);
  const int c2 = net.basic_param_column(i2);
  double est = 0.0, var = 0.0;
  if (c2 >= 0) {
    est += fit.theta_hat(c2);
    var += fit.cov(c2, c2);
  }
  if (c1 >= 0) {
    est -= fit.theta_hat(c1);
    var += fit.cov(c1, c1);
  }
  if (c1 >= 0 && c2 >= 0) var -= 2.0 * fit.cov(c1, c2);
  return {est, std::sqrt(var)};
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// One profile evaluation: maximize over the other parameters with parameter
// `index` pinned at x. -inf slices map to +inf deviance (the penalized
// likelihood truly collapses there).
class ProfileCurve {
 public:
  ProfileCurve(const DesignMatrix& dm, int index, double lstar_max,
               double crit, const Eigen::VectorXd& start, const FitOptions& opts)
      : dm_(dm), index_(index), lstar_max_(lstar_max), crit_(crit),
        warm_(start), opts_(opts) {}

  // 2 (l*_max - l*_profile(x)) - crit; positive outside the confidence region.
  double excess_deviance(double x) {
    const ConstrainedFit cf = fit_with_fixed(dm_, index_, x, warm_, opts_);
    if (cf.penalized_loglik == kNegInf) {
      return std::numeric_limits<double>::infinity();
    }
    if (!cf.converged) {
      throw InnerFitFailure("profile inner fit did not converge at x = " +
                            std::to_string(x));
    }
    warm_ = cf.theta;  // warm start the next evaluation
    return 2.0 * (lstar_max_ - cf.penalized_loglik) - crit_;
  }

 private:
  const DesignMatrix& dm_;
  int index_;
  double lstar_max_;
  double crit_;
  Eigen::VectorXd warm_;
  FitOptions opts_;
};

double find_endpoint(const DesignMatrix& dm, int index, double center,
                     double se, int direction, double lstar_max, double crit,
                     const Eigen::VectorXd& theta_hat, const FitOptions& opts) {
  ProfileCurve curve(dm, index, lstar_max, crit, theta_hat, opts);

  // Walk outward in short warm-started probes up to the bracket limit
  // (10 se, doubled up to 4 times); jumping straight to the limit would hand
  // the inner fit a hopeless start.
  double inner = center;  // deviance below the threshold here by definition
  double outer = 0.0;
  double limit = 10.0 * se;
  bool bracketed = false;
  for (int attempt = 0; attempt <= 4 && !bracketed; ++attempt) {
    while (std::abs(inner - center) < limit) {
      outer = inner + direction * 2.0 * se;
      if (std::abs(outer - center) > limit) outer = center + direction * limit;
      if (curve.excess_deviance(outer) >= 0.0) {
        bracketed = true;
        break;
      }
      inner = outer;
    }
    limit *= 2.0;
  }
  if (!bracketed) {
    throw BracketFailure(
        "profile deviance does not cross the threshold within the expanded "
        "bracket");
  }

  while (std::abs(outer - inner) > 1e-4) {
    const double mid = 0.5 * (inner + outer);
    if (curve.excess_deviance(mid) < 0.0) {
      inner = mid;
    } else {
      outer = mid;
    }
  }
  return 0.5 * (inner + outer);
}

}  // namespace

Interval profile_ci(const Network& net, const DesignMatrix& dm,
                    const FitResult& fit, int param_index, double level,
                    const FitOptions& opts) {
  if (!fit.converged) {
    throw NotConvergedFit("profile interval requested from a non-converged fit");
  }
  if (!fit.penalized) {
    throw ValidationError("profile intervals are defined for penalized fits");
  }
  const double crit = stats::chi_square_quantile_1df(level);
  const double se = std::sqrt(fit.cov(param_index, param_index));
  const double lstar_max = penalized_log_likelihood(dm, fit.theta_hat);
  const double center = fit.theta_hat(param_index);

  FitOptions inner = opts;
  inner.penalized = true;
  const double lo = find_endpoint(dm, param_index, center, se, -1, lstar_max,
                                  crit, fit.theta_hat, inner);
  const double hi = find_endpoint(dm, param_index, center, se, +1, lstar_max,
                                  crit, fit.theta_hat, inner);
  return {lo, hi};
}

Interval profile_contrast(const Network& net, const DesignMatrix& dm,
                          const FitResult& fit, const std::string& t1,
                          const std::string& t2, double level,
                          const FitOptions& opts) {
  const int i1 = net.treatment_index(t1);
  const int i2 = net.treatment_index(t2);
  if (i1 == i2) return {0.0, 0.0};
  if (i1 == net.reference()) {
    return profile_ci(net, dm, fit, net.basic_param_column(i2), level, opts);
  }
  // Reparametrize with t1 as reference, then profile the basic parameter.
  const Network renet = net.with_reference(t1);
  const DesignMatrix redm = build(renet);
  FitOptions fopts = opts;
  fopts.penalized = true;
  const FitResult refit = plnma::fit(renet, redm, fopts);
  return profile_ci(renet, redm, refit,
                    renet.basic_param_column(renet.treatment_index(t2)), level,
                    opts);
}

ContrastTable league_table(const Network& net, const DesignMatrix& dm,
                           const FitResult& fit, CiKind kind, double level,
                           double phi, const FitOptions& opts) {
  if (!fit.converged) {
    throw NotConvergedFit("league table requested from a non-converged fit");
  }
  if (phi < 1.0) {
    throw PhiOutOfRange("phi must be >= 1");
  }
  const double z = stats::normal_quantile(0.5 * (1.0 + level));
  const double infl = std::sqrt(phi);

  std::vector<ContrastRow> rows;
  for (int i = 0; i < net.num_treatments(); ++i) {
    for (int j = i + 1; j < net.num_treatments(); ++j) {
      const std::string& t1 = net.treatment_label(i);
      const std::string& t2 = net.treatment_label(j);
      const auto [est, se] = contrast(net, fit, t1, t2);
      ContrastRow row;
      row.t1 = t1;
      row.t2 = t2;
      row.estimate = est;
      row.ci_kind = kind;
      row.phi_applied = phi;
      if (kind == CiKind::wald) {
        row.se = phi > 1.0 ? se * infl : se;
        row.ci_low = est - z * row.se;
        row.ci_high = est + z * row.se;
      } else {
        row.se = se;  // informational; profile limits are not phi-scaled
        const Interval ci = profile_contrast(net, dm, fit, t1, t2, level, opts);
        row.ci_low = ci.lo;
        row.ci_high = ci.hi;
      }
      rows.push_back(row);
    }
  }
  return ContrastTable(std::move(rows));
}

}  // namespace plnma
