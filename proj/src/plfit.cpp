#include "plnma/plfit.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>

#include "plnma/errors.hpp"

namespace plnma {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double softplus(double x) {
  // log(1 + e^x) without overflow
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_dims(const DesignMatrix& dm, const Eigen::VectorXd& theta) {
  if (theta.size() != dm.Z.cols()) {
    throw DimensionMismatch("theta has length " + std::to_string(theta.size()) +
                            ", design matrix has " + std::to_string(dm.Z.cols()) +
                            " columns");
  }
}

Eigen::VectorXd fitted_probs(const DesignMatrix& dm, const Eigen::VectorXd& theta) {
  return (dm.Z * theta).unaryExpr([](double e) { return expit(e); });
}

Eigen::VectorXd weights(const DesignMatrix& dm, const Eigen::VectorXd& p) {
  return dm.trials.array() * p.array() * (1.0 - p.array());
}

Eigen::MatrixXd information_from_weights(const DesignMatrix& dm,
                                         const Eigen::VectorXd& w) {
  return dm.Z.transpose() * w.asDiagonal() * dm.Z;
}

// Cholesky of the information; NumericalIssue means not positive definite.
Eigen::LLT<Eigen::MatrixXd> info_llt(const Eigen::MatrixXd& info) {
  Eigen::LLT<Eigen::MatrixXd> llt(info);
  if (llt.info() != Eigen::Success) {
    throw SingularInformation("information matrix is not positive definite");
  }
  return llt;
}

double log_det_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

// Hat diagonal h_a = w_a z_a' (Z'WZ)^-1 z_a.
Eigen::VectorXd hat_diagonal(const DesignMatrix& dm, const Eigen::VectorXd& w,
                             const Eigen::LLT<Eigen::MatrixXd>& llt) {
  const Eigen::MatrixXd b = llt.solve(dm.Z.transpose());  // p x arms
  Eigen::VectorXd h(dm.arms());
  for (int a = 0; a < dm.arms(); ++a) {
    h(a) = w(a) * dm.Z.row(a).dot(b.col(a));
  }
  return h;
}

double objective(const DesignMatrix& dm, const Eigen::VectorXd& theta,
                 bool penalized) {
  return penalized ? penalized_log_likelihood(dm, theta)
                   : log_likelihood(dm, theta);
}

// Objective value with a singular information treated as -inf: used only to
// reject trial steps, never to report results.
double objective_or_neg_inf(const DesignMatrix& dm, const Eigen::VectorXd& theta,
                            bool penalized) {
  try {
    return objective(dm, theta, penalized);
  } catch (const SingularInformation&) {
    return kNegInf;
  }
}

Eigen::VectorXd initial_theta(const DesignMatrix& dm) {
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(dm.params());
  for (int i = 0; i < dm.n_studies; ++i) {
    double r = 0.0, n = 0.0;
    for (int a = 0; a < dm.arms(); ++a) {
      if (dm.Z(a, i) == 1.0) {
        r += dm.events(a);
        n += dm.trials(a);
      }
    }
    const double q = (r + 0.5) / (n + 1.0);
    theta(i) = std::log(q / (1.0 - q));
  }
  return theta;
}

}  // namespace

FitOptions tight_options(bool penalized) {
  FitOptions o;
  o.penalized = penalized;
  o.score_tol = 1e-10;
  o.step_tol = 1e-13;
  return o;
}

double log_likelihood(const DesignMatrix& dm, const Eigen::VectorXd& theta) {
  check_dims(dm, theta);
  const Eigen::VectorXd eta = dm.Z * theta;
  double ll = 0.0;
  for (int a = 0; a < dm.arms(); ++a) {
    const double r = dm.events(a);
    const double n = dm.trials(a);
    const double sp = softplus(eta(a));
    ll += std::lgamma(n + 1.0) - std::lgamma(r + 1.0) - std::lgamma(n - r + 1.0);
    ll += r * (eta(a) - sp) - (n - r) * sp;  // r log p + (n-r) log(1-p)
  }
  return ll;
}

Eigen::MatrixXd fisher_information(const DesignMatrix& dm,
                                   const Eigen::VectorXd& theta) {
  check_dims(dm, theta);
  const Eigen::VectorXd p = fitted_probs(dm, theta);
  return information_from_weights(dm, weights(dm, p));
}

double penalized_log_likelihood(const DesignMatrix& dm,
                                const Eigen::VectorXd& theta) {
  const auto llt = info_llt(fisher_information(dm, theta));
  return log_likelihood(dm, theta) + 0.5 * log_det_from_llt(llt);
}

Eigen::VectorXd modified_score(const DesignMatrix& dm,
                               const Eigen::VectorXd& theta, bool penalized) {
  check_dims(dm, theta);
  const Eigen::VectorXd p = fitted_probs(dm, theta);
  Eigen::VectorXd resid = dm.events - dm.trials.cwiseProduct(p);
  if (penalized) {
    const Eigen::VectorXd w = weights(dm, p);
    const auto llt = info_llt(information_from_weights(dm, w));
    const Eigen::VectorXd h = hat_diagonal(dm, w, llt);
    resid += h.cwiseProduct(Eigen::VectorXd::Constant(dm.arms(), 0.5) - p);
  }
  return dm.Z.transpose() * resid;
}

FitResult fit(const Network& net, const DesignMatrix& dm, const FitOptions& opts) {
  if (opts.max_iter < 1 || !(opts.score_tol > 0.0) || !(opts.step_tol > 0.0) ||
      opts.step_halving_max < 0) {
    throw ValidationError("invalid fit options: tolerances must be positive "
                          "and max_iter >= 1");
  }
  FitResult res;
  res.penalized = opts.penalized;

  Eigen::VectorXd theta = initial_theta(dm);
  double cur = objective(dm, theta, opts.penalized);
  Eigen::VectorXd prev_step;

  for (int it = 1; it <= opts.max_iter; ++it) {
    res.iterations = it;

    const Eigen::VectorXd p = fitted_probs(dm, theta);
    const Eigen::VectorXd w = weights(dm, p);
    const auto llt = info_llt(information_from_weights(dm, w));

    Eigen::VectorXd resid = dm.events - dm.trials.cwiseProduct(p);
    if (opts.penalized) {
      const Eigen::VectorXd h = hat_diagonal(dm, w, llt);
      resid += h.cwiseProduct(Eigen::VectorXd::Constant(dm.arms(), 0.5) - p);
    }
    const Eigen::VectorXd score = dm.Z.transpose() * resid;
    const Eigen::VectorXd delta = llt.solve(score);

    if (score.cwiseAbs().maxCoeff() <= opts.score_tol) {
      // For unpenalized fits the score alone is not trusted: on separated
      // data it vanishes along the divergent path long before the estimates
      // blow up, so require the Newton step to be small as well.
      if (opts.penalized || delta.cwiseAbs().maxCoeff() <= 1e-2) {
        res.converged = true;
        break;
      }
    }

    // Near the optimum the per-step gain falls below one ulp of the
    // objective and a strict ascent test would stall; roundoff-flat steps
    // are acceptable once the Newton step is tiny.
    const double flat_tol = delta.cwiseAbs().maxCoeff() <= 1e-4
                                ? 1e-14 * (1.0 + std::abs(cur))
                                : 0.0;
    double s = 1.0;
    bool accepted = false;
    Eigen::VectorXd cand;
    for (int half = 0; half <= opts.step_halving_max; ++half) {
      cand = theta + s * delta;
      const double val = objective_or_neg_inf(dm, cand, opts.penalized);
      if (val >= cur - flat_tol) {
        theta = cand;
        cur = std::max(val, cur);
        accepted = true;
        break;
      }
      s *= 0.5;
    }
    if (!accepted) break;  // cannot ascend further; reported via converged flag

    // The hat-diagonal term makes the information a crude Hessian on
    // zero-heavy data and the iteration a slow linear contraction. Once
    // successive full steps shrink geometrically along one direction,
    // extrapolate the remaining tail (Aitken), guarded like any other step.
    Eigen::VectorXd step = s * delta;
    if (s == 1.0 && prev_step.size() == theta.size()) {
      const double num = step.dot(prev_step);
      const double den = prev_step.squaredNorm();
      const double rho = den > 0.0 ? num / den : 0.0;
      const double cos2 =
          den > 0.0 && step.squaredNorm() > 0.0
              ? num * num / (den * step.squaredNorm())
              : 0.0;
      if (rho > 0.2 && rho < 0.995 && cos2 > 0.9) {
        const Eigen::VectorXd jump = (rho / (1.0 - rho)) * step;
        const double val =
            objective_or_neg_inf(dm, theta + jump, opts.penalized);
        if (val >= cur - 1e-14 * (1.0 + std::abs(cur))) {
          theta += jump;
          cur = std::max(val, cur);
          step.resize(0);  // pattern restarts after a jump
        }
      }
    }
    prev_step = step;

    if (!opts.penalized &&
        theta.cwiseAbs().maxCoeff() > opts.separation_threshold) {
      throw SeparationDetected(
          "parameter exceeded " + std::to_string(opts.separation_threshold) +
          " on the log-odds scale; maximum likelihood estimate is unbounded");
    }
    if ((s * delta).cwiseAbs().maxCoeff() <= opts.step_tol) {
      res.converged = true;
      break;
    }
  }

  const auto llt = info_llt(fisher_information(dm, theta));
  res.theta_hat = theta;
  res.cov = llt.solve(Eigen::MatrixXd::Identity(dm.params(), dm.params()));
  res.loglik = log_likelihood(dm, theta);
  res.penalized_loglik =
      opts.penalized ? res.loglik + 0.5 * log_det_from_llt(llt) : res.loglik;
  res.p_hat = fitted_probs(dm, theta);
  res.max_abs_score =
      modified_score(dm, theta, opts.penalized).cwiseAbs().maxCoeff();
  return res;
}

FitResult fit(const Network& net, const FitOptions& opts) {
  return fit(net, build(net), opts);
}

ConstrainedFit fit_with_fixed(const DesignMatrix& dm, int fixed_index,
                              double fixed_value, const Eigen::VectorXd& start,
                              const FitOptions& opts) {
  check_dims(dm, start);
  const int p = dm.params();
  std::vector<int> free;
  free.reserve(static_cast<std::size_t>(p) - 1);
  for (int j = 0; j < p; ++j) {
    if (j != fixed_index) free.push_back(j);
  }

  ConstrainedFit out;
  Eigen::VectorXd theta = start;
  theta(fixed_index) = fixed_value;
  double cur = objective_or_neg_inf(dm, theta, /*penalized=*/true);
  if (cur == kNegInf) {
    out.theta = theta;
    out.penalized_loglik = kNegInf;
    return out;
  }
  Eigen::VectorXd prev_step;

  for (int it = 1; it <= opts.max_iter; ++it) {
    const Eigen::VectorXd pr = fitted_probs(dm, theta);
    const Eigen::VectorXd w = weights(dm, pr);
    Eigen::LLT<Eigen::MatrixXd> llt;
    try {
      llt = info_llt(information_from_weights(dm, w));
    } catch (const SingularInformation&) {
      break;
    }
    const Eigen::VectorXd h = hat_diagonal(dm, w, llt);
    const Eigen::VectorXd resid =
        dm.events - dm.trials.cwiseProduct(pr) +
        h.cwiseProduct(Eigen::VectorXd::Constant(dm.arms(), 0.5) - pr);
    const Eigen::VectorXd score = dm.Z.transpose() * resid;

    Eigen::VectorXd score_free(free.size());
    for (std::size_t k = 0; k < free.size(); ++k) score_free(k) = score(free[k]);
    if (score_free.cwiseAbs().maxCoeff() <= opts.score_tol) {
      out.converged = true;
      break;
    }

    // Restricted Newton direction from the free-by-free information block.
    Eigen::MatrixXd info = information_from_weights(dm, w);
    Eigen::MatrixXd info_free(free.size(), free.size());
    for (std::size_t a = 0; a < free.size(); ++a) {
      for (std::size_t b = 0; b < free.size(); ++b) {
        info_free(a, b) = info(free[a], free[b]);
      }
    }
    Eigen::LLT<Eigen::MatrixXd> llt_free(info_free);
    if (llt_free.info() != Eigen::Success) break;
    Eigen::VectorXd delta = llt_free.solve(score_free);
    // Far-out slices can make the Newton direction explode; cap it so the
    // line search works on evaluable candidates.
    const double step_cap = 5.0;
    const double mag = delta.cwiseAbs().maxCoeff();
    if (mag > step_cap) delta *= step_cap / mag;

    const double flat_tol = delta.cwiseAbs().maxCoeff() <= 1e-4
                                ? 1e-14 * (1.0 + std::abs(cur))
                                : 0.0;
    double s = 1.0;
    bool accepted = false;
    for (int half = 0; half <= opts.step_halving_max; ++half) {
      Eigen::VectorXd cand = theta;
      for (std::size_t k = 0; k < free.size(); ++k) {
        cand(free[k]) += s * delta(k);
      }
      const double val = objective_or_neg_inf(dm, cand, /*penalized=*/true);
      if (val >= cur - flat_tol) {
        theta = cand;
        cur = std::max(val, cur);
        accepted = true;
        break;
      }
      s *= 0.5;
    }
    if (!accepted) break;

    Eigen::VectorXd step = Eigen::VectorXd::Zero(theta.size());
    for (std::size_t k = 0; k < free.size(); ++k) step(free[k]) = s * delta(k);
    if (s == 1.0 && prev_step.size() == theta.size()) {
      const double num = step.dot(prev_step);
      const double den = prev_step.squaredNorm();
      const double rho = den > 0.0 ? num / den : 0.0;
      const double cos2 =
          den > 0.0 && step.squaredNorm() > 0.0
              ? num * num / (den * step.squaredNorm())
              : 0.0;
      if (rho > 0.2 && rho < 0.995 && cos2 > 0.9) {
        const Eigen::VectorXd jump = (rho / (1.0 - rho)) * step;
        const double val = objective_or_neg_inf(dm, theta + jump, true);
        if (val >= cur - 1e-14 * (1.0 + std::abs(cur))) {
          theta += jump;
          cur = std::max(val, cur);
          step.resize(0);
        }
      }
    }
    prev_step = step;

    if ((s * delta).cwiseAbs().maxCoeff() <= opts.step_tol) {
      out.converged = true;
      break;
    }
  }

  out.theta = theta;
  out.penalized_loglik = cur;
  return out;
}

}  // namespace plnma
