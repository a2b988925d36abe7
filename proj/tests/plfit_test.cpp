#include <doctest.h>

#include <cmath>
#include <random>

#include "plnma/design.hpp"
#include "plnma/errors.hpp"
#include "plnma/plfit.hpp"
#include "plnma/rng.hpp"
#include "test_helpers.hpp"

using namespace plnma;
using plnma::testing::arm;

namespace {

// Random connected network over small label sets for property checks.
Network random_small_network(rng::SplitMix64& g, int max_t = 4, int max_n = 6) {
  const int t = static_cast<int>(g.uniform_int(2, max_t));
  const int n = static_cast<int>(g.uniform_int(t - 1, max_n));
  std::vector<ArmRecord> recs;
  const auto label = [](int k) { return std::string(1, static_cast<char>('A' + k)); };
  for (int s = 0; s < n; ++s) {
    // first t-1 studies form a spanning chain, the rest are random pairs
    int a, b;
    if (s < t - 1) {
      a = s;
      b = s + 1;
    } else {
      a = static_cast<int>(g.uniform_int(0, t - 1));
      do {
        b = static_cast<int>(g.uniform_int(0, t - 1));
      } while (b == a);
    }
    const std::string id = "S" + std::to_string(s + 1);
    const long long n1 = g.uniform_int(5, 50);
    const long long n2 = g.uniform_int(5, 50);
    recs.push_back(arm(id, label(a), g.uniform_int(0, n1), n1));
    recs.push_back(arm(id, label(b), g.uniform_int(0, n2), n2));
  }
  return validate(recs);
}

}  // namespace

TEST_CASE("log-likelihood closed forms at theta = 0") {
  // single arm r=1, n=2 at p=1/2: log C(2,1) + 2 log(1/2) = -log 2
  const Network one = validate({arm("S1", "A", 1, 2), arm("S1", "B", 1, 2)});
  const DesignMatrix dm = build(one);
  const Eigen::VectorXd theta = Eigen::VectorXd::Zero(2);
  // both arms identical here; the study contributes twice the single-arm value
  CHECK(log_likelihood(dm, theta) ==
        doctest::Approx(2.0 * -std::log(2.0)).epsilon(1e-12));

  const Network zero = validate({arm("S1", "A", 0, 10), arm("S1", "B", 0, 10)});
  const DesignMatrix dmz = build(zero);
  CHECK(log_likelihood(dmz, Eigen::VectorXd::Zero(2)) ==
        doctest::Approx(20.0 * std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("log-likelihood at the saturated optimum equals the direct formula") {
  const Network net = testing::pair_toy();
  const DesignMatrix dm = build(net);
  const FitResult res = fit(net, dm, tight_options(/*penalized=*/false));
  // direct evaluation at p = (0.3, 0.6)
  const auto lchoose = [](double n, double r) {
    return std::lgamma(n + 1) - std::lgamma(r + 1) - std::lgamma(n - r + 1);
  };
  const double expected = lchoose(10, 3) + 3 * std::log(0.3) + 7 * std::log(0.7) +
                          lchoose(10, 6) + 6 * std::log(0.6) + 4 * std::log(0.4);
  CHECK(res.loglik == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("dimension mismatch is rejected") {
  const DesignMatrix dm = build(testing::pair_toy());
  CHECK_THROWS_AS(log_likelihood(dm, Eigen::VectorXd::Zero(3)), DimensionMismatch);
  CHECK_THROWS_AS(fisher_information(dm, Eigen::VectorXd::Zero(1)), DimensionMismatch);
}

TEST_CASE("fisher information by hand at theta = 0") {
  const Network net = validate({arm("S1", "A", 5, 10), arm("S1", "B", 5, 10)});
  const DesignMatrix dm = build(net);
  const Eigen::MatrixXd info = fisher_information(dm, Eigen::VectorXd::Zero(2));
  CHECK(info(0, 0) == doctest::Approx(5.0).epsilon(1e-14));
  CHECK(info(0, 1) == doctest::Approx(2.5).epsilon(1e-14));
  CHECK(info(1, 0) == doctest::Approx(2.5).epsilon(1e-14));
  CHECK(info(1, 1) == doctest::Approx(2.5).epsilon(1e-14));
}

TEST_CASE("arm weight vanishes continuously as p approaches the boundary") {
  const DesignMatrix dm = build(testing::pair_toy());
  Eigen::VectorXd theta(2);
  theta << -30.0, 0.0;
  const Eigen::MatrixXd info = fisher_information(dm, theta);
  CHECK(info(0, 0) > 0.0);
  CHECK(info(0, 0) < 1e-10);
}

TEST_CASE("inverse information reproduces the classical 2x2 logOR variance") {
  const Network net = testing::pair_toy();
  const DesignMatrix dm = build(net);
  const FitResult res = fit(net, dm, tight_options(/*penalized=*/false));
  const double expected = 1.0 / 3 + 1.0 / 7 + 1.0 / 6 + 1.0 / 4;
  CHECK(res.cov(1, 1) == doctest::Approx(expected).epsilon(1e-7));
}

TEST_CASE("penalized log-likelihood adds half the log determinant") {
  const Network net = validate({arm("S1", "A", 5, 10), arm("S1", "B", 5, 10)});
  const DesignMatrix dm = build(net);
  const Eigen::VectorXd theta = Eigen::VectorXd::Zero(2);
  // det [[5,2.5],[2.5,2.5]] = 6.25
  CHECK(penalized_log_likelihood(dm, theta) ==
        doctest::Approx(log_likelihood(dm, theta) + 0.5 * std::log(6.25))
            .epsilon(1e-12));
}

TEST_CASE("penalty is invariant to row permutation of the design") {
  const Network net = testing::triangle_toy();
  const DesignMatrix dm = build(net);
  Eigen::VectorXd theta(5);
  theta << -1.0, -2.0, -0.5, 0.3, 0.7;
  const double base = penalized_log_likelihood(dm, theta) - log_likelihood(dm, theta);

  DesignMatrix shuffled = dm;
  shuffled.Z.row(0).swap(shuffled.Z.row(3));
  std::swap(shuffled.events(0), shuffled.events(3));
  std::swap(shuffled.trials(0), shuffled.trials(3));
  const double perm =
      penalized_log_likelihood(shuffled, theta) - log_likelihood(shuffled, theta);
  CHECK(base == doctest::Approx(perm).epsilon(1e-12));
}

TEST_CASE("modified score vanishes at the penalized optimum") {
  const Network net = testing::triangle_toy();
  const DesignMatrix dm = build(net);
  const FitOptions opts;  // defaults
  const FitResult res = fit(net, dm, opts);
  REQUIRE(res.converged);
  CHECK(modified_score(dm, res.theta_hat).cwiseAbs().maxCoeff() <= opts.score_tol);
}

TEST_CASE("plain score vanishes at the saturated MLE") {
  const Network net = testing::pair_toy();
  const DesignMatrix dm = build(net);
  Eigen::VectorXd theta(2);
  theta << std::log(0.3 / 0.7), std::log(0.6 / 0.4) - std::log(0.3 / 0.7);
  CHECK(modified_score(dm, theta, /*penalized=*/false).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("modified score matches finite differences of the penalized loglik") {
  rng::SplitMix64 g(424242);
  const double h = 1e-5;
  for (int trial = 0; trial < 20; ++trial) {
    const Network net = random_small_network(g);
    const DesignMatrix dm = build(net);
    for (int rep = 0; rep < 5; ++rep) {
      Eigen::VectorXd theta(dm.params());
      for (int j = 0; j < dm.params(); ++j) {
        theta(j) = j < dm.n_studies ? g.uniform(-4.0, 0.0) : g.uniform(-1.5, 1.5);
      }
      const Eigen::VectorXd score = modified_score(dm, theta);
      Eigen::VectorXd fd(dm.params());
      for (int j = 0; j < dm.params(); ++j) {
        Eigen::VectorXd up = theta, dn = theta;
        up(j) += h;
        dn(j) -= h;
        fd(j) = (penalized_log_likelihood(dm, up) -
                 penalized_log_likelihood(dm, dn)) / (2.0 * h);
      }
      const double rel = (fd - score).cwiseAbs().maxCoeff() /
                         std::max(1.0, score.cwiseAbs().maxCoeff());
      CHECK(rel < 1e-5);
    }
  }
}

TEST_CASE("fit options are validated") {
  FitOptions bad;
  bad.max_iter = 0;
  CHECK_THROWS_AS(fit(testing::pair_toy(), bad), ValidationError);
  bad = FitOptions{};
  bad.score_tol = 0.0;
  CHECK_THROWS_AS(fit(testing::pair_toy(), bad), ValidationError);
}

TEST_CASE("unpenalized fits report penalized_loglik equal to loglik") {
  const FitResult res = fit(testing::triangle_toy(), tight_options(false));
  CHECK(res.penalized_loglik == res.loglik);
}

TEST_CASE("unpenalized fit recovers the closed-form 2x2 MLE") {
  const Network net = testing::pair_toy();
  const FitResult res = fit(net, tight_options(/*penalized=*/false));
  REQUIRE(res.converged);
  CHECK(res.theta_hat(1) == doctest::Approx(std::log(3.5)).epsilon(1e-8));
  CHECK(res.p_hat(0) == doctest::Approx(0.3).epsilon(1e-8));
  CHECK(res.p_hat(1) == doctest::Approx(0.6).epsilon(1e-8));
}

TEST_CASE("penalized fit equals the half-cell-added logOR on saturated data") {
  const Network net = testing::pair_toy();
  const FitResult res = fit(net, tight_options());
  REQUIRE(res.converged);
  const double oracle = std::log((6.5 * 7.5) / (4.5 * 3.5));
  CHECK(res.theta_hat(1) == doctest::Approx(oracle).epsilon(1e-8));
}

TEST_CASE("double-zero study alone: penalized gives 0 with a finite SE") {
  const Network net = validate({arm("S1", "A", 0, 10), arm("S1", "B", 0, 10)});
  const FitResult res = fit(net, tight_options());
  REQUIRE(res.converged);
  CHECK(std::abs(res.theta_hat(1)) < 1e-9);
  CHECK(std::isfinite(std::sqrt(res.cov(1, 1))));
  CHECK(res.cov(1, 1) > 0.0);
}

TEST_CASE("double-zero study alone: unpenalized detects separation") {
  const Network net = validate({arm("S1", "A", 0, 10), arm("S1", "B", 0, 10)});
  FitOptions opts;
  opts.penalized = false;
  CHECK_THROWS_AS(fit(net, opts), SeparationDetected);
}

TEST_CASE("one-sided zero cell separates the unpenalized fit") {
  const Network net = validate({arm("S1", "A", 0, 10), arm("S1", "B", 10, 10)});
  FitOptions opts;
  opts.penalized = false;
  CHECK_THROWS_AS(fit(net, opts), SeparationDetected);
  const FitResult pres = fit(net, tight_options());
  CHECK(pres.converged);
  CHECK(pres.theta_hat.cwiseAbs().maxCoeff() < 50.0);
}

TEST_CASE("penalized estimates stay finite on randomized zero-heavy networks") {
  rng::SplitMix64 g(777);
  for (int trial = 0; trial < 25; ++trial) {
    Network net = random_small_network(g);
    // zero out every other study entirely
    auto recs = net.to_records();
    for (std::size_t i = 0; i < recs.size(); ++i) {
      if ((i / 2) % 2 == 0) recs[i].events = 0;
    }
    net = validate(recs);
    const FitResult res = fit(net, FitOptions{});
    CHECK(res.converged);
    CHECK(res.theta_hat.cwiseAbs().maxCoeff() < 50.0);
    for (int j = 0; j < res.cov.rows(); ++j) {
      CHECK(std::isfinite(res.cov(j, j)));
      CHECK(res.cov(j, j) > 0.0);
    }
  }
}

TEST_CASE("accepted iterations never decrease the penalized objective") {
  // monotone ascent is implied by step-halving; spot-check the end state
  const Network net = testing::zero_heavy_toy();
  const DesignMatrix dm = build(net);
  const FitResult res = fit(net, dm, FitOptions{});
  REQUIRE(res.converged);
  const Eigen::VectorXd start = Eigen::VectorXd::Zero(dm.params());
  CHECK(res.penalized_loglik >= penalized_log_likelihood(dm, start));
}

TEST_CASE("fitted probabilities are strictly interior") {
  const Network net = testing::zero_heavy_toy();
  const FitResult res = fit(net, FitOptions{});
  for (int a = 0; a < res.p_hat.size(); ++a) {
    CHECK(res.p_hat(a) > 0.0);
    CHECK(res.p_hat(a) < 1.0);
  }
}

TEST_CASE("constrained fit reproduces the unconstrained optimum at theta_j") {
  const Network net = testing::triangle_toy();
  const DesignMatrix dm = build(net);
  const FitResult res = fit(net, dm, tight_options());
  const int j = dm.n_studies;  // first basic parameter
  const ConstrainedFit cf =
      fit_with_fixed(dm, j, res.theta_hat(j), res.theta_hat, tight_options());
  CHECK(cf.converged);
  CHECK(cf.penalized_loglik ==
        doctest::Approx(res.penalized_loglik).epsilon(1e-10));
}
