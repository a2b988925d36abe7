#include <doctest.h>

#include <cmath>

#include "plnma/design.hpp"
#include "plnma/errors.hpp"
#include "plnma/overdispersion.hpp"
#include "test_helpers.hpp"

using namespace plnma;
using plnma::testing::arm;

namespace {

// Fit with p_hat pinned by hand, for formula-level checks.
FitResult fabricated_fit(const Network& net, const std::vector<double>& p) {
  FitResult res;
  res.converged = true;
  res.p_hat.resize(static_cast<Eigen::Index>(p.size()));
  for (std::size_t i = 0; i < p.size(); ++i) {
    res.p_hat(static_cast<Eigen::Index>(i)) = p[i];
  }
  const int params = net.num_studies() + net.num_treatments() - 1;
  res.theta_hat = Eigen::VectorXd::Zero(params);
  res.cov = Eigen::MatrixXd::Identity(params, params);
  return res;
}

}  // namespace

TEST_CASE("pearson statistic from a hand-set arm") {
  // single arm with r=3, n=10, p=0.2 contributes (3-2)^2/1.6 = 0.625
  const Network net = validate({arm("S1", "A", 3, 10), arm("S1", "B", 4, 10)});
  const FitResult res = fabricated_fit(net, {0.2, 0.4});
  // arm B contributes 0 (residual zero)
  CHECK(pearson_statistic(net, res) == doctest::Approx(0.625).epsilon(1e-12));
}

TEST_CASE("pearson statistic is zero for a saturated fit") {
  // the unpenalized saturated fit reproduces r/n exactly, so residuals vanish
  const Network net = testing::pair_toy();
  const FitResult res = fit(net, tight_options(/*penalized=*/false));
  CHECK(pearson_statistic(net, res) == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("degenerate fitted variance is rejected") {
  const Network net = validate({arm("S1", "A", 0, 10), arm("S1", "B", 1, 10)});
  const FitResult res = fabricated_fit(net, {0.0, 0.1});
  CHECK_THROWS_AS(pearson_statistic(net, res), DegenerateFit);
}

TEST_CASE("perfect fit clamps phi to one") {
  const Network net = testing::pair_toy();
  const FitResult res = fit(net, tight_options(/*penalized=*/false));
  const PhiEstimate phi = fletcher_phi(net, res);
  CHECK(phi.phi == 1.0);
  CHECK(phi.phi_raw == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(phi.m == 1);  // (T-1)+(N-1) = 1+0
  CHECK(!phi.negative_denominator);
}

TEST_CASE("zero residuals make s_bar zero so phi_raw = P/m") {
  const Network net = validate({arm("S1", "A", 2, 10), arm("S1", "B", 4, 10),
                                arm("S2", "A", 3, 10), arm("S2", "B", 5, 10)});
  const FitResult res = fabricated_fit(net, {0.2, 0.4, 0.3, 0.5});
  const PhiEstimate phi = fletcher_phi(net, res);
  CHECK(phi.s_bar == doctest::Approx(0.0));
  CHECK(phi.pearson == doctest::Approx(0.0));
  CHECK(phi.phi == 1.0);
}

TEST_CASE("fletcher phi matches a spreadsheet-style recomputation") {
  const Network net = validate({arm("S1", "A", 2, 10), arm("S1", "B", 5, 10),
                                arm("S2", "A", 4, 10), arm("S2", "B", 3, 10),
                                arm("S3", "A", 1, 10), arm("S3", "B", 6, 10)});
  const std::vector<double> p = {0.25, 0.45, 0.3, 0.4, 0.2, 0.5};
  const FitResult res = fabricated_fit(net, p);

  // direct evaluation of the three formulas
  const double counts[6][2] = {{2, 10}, {5, 10}, {4, 10}, {3, 10}, {1, 10}, {6, 10}};
  double pearson = 0.0, s_sum = 0.0;
  for (int i = 0; i < 6; ++i) {
    const double r = counts[i][0], n = counts[i][1];
    const double v = n * p[static_cast<std::size_t>(i)] * (1 - p[static_cast<std::size_t>(i)]);
    const double resid = r - n * p[static_cast<std::size_t>(i)];
    pearson += resid * resid / v;
    s_sum += n * (1 - 2 * p[static_cast<std::size_t>(i)]) * resid / v;
  }
  const double m = (2 - 1) + (3 - 1);  // (T-1)+(N-1)
  const double expected_raw = (pearson / m) / (1 + s_sum / 6.0);

  const PhiEstimate phi = fletcher_phi(net, res);
  CHECK(phi.pearson == doctest::Approx(pearson).epsilon(1e-12));
  CHECK(phi.phi_raw == doctest::Approx(expected_raw).epsilon(1e-12));
  CHECK(phi.phi == doctest::Approx(std::max(1.0, expected_raw)).epsilon(1e-12));
  CHECK(phi.m == 3);
}

TEST_CASE("residual df mode counts observations minus parameters") {
  const Network net = testing::quad_toy();
  const FitResult res = fit(net, FitOptions{});
  const PhiEstimate paper = fletcher_phi(net, res, DfMode::paper);
  const PhiEstimate resid = fletcher_phi(net, res, DfMode::residual);
  CHECK(paper.m == (4 - 1) + (5 - 1));
  CHECK(resid.m == net.arm_total() - (net.num_studies() + net.num_treatments() - 1));
  CHECK(paper.df_mode == DfMode::paper);
  CHECK(resid.df_mode == DfMode::residual);
}

TEST_CASE("residual df mode refuses saturated models") {
  const Network net = testing::pair_toy();
  const FitResult res = fit(net, FitOptions{});
  CHECK_THROWS_AS(fletcher_phi(net, res, DfMode::residual), DegenerateFit);
}

TEST_CASE("fletcher phi is invariant to relabeling") {
  const Network net = validate({arm("S1", "A", 2, 10), arm("S1", "B", 5, 10),
                                arm("S2", "A", 4, 10), arm("S2", "B", 3, 10),
                                arm("S3", "A", 1, 10), arm("S3", "B", 6, 10)});
  const FitResult res = fit(net, tight_options());
  const PhiEstimate base = fletcher_phi(net, res);

  // swap treatment labels and study labels; the same data re-fitted
  const Network renamed =
      validate({arm("T3", "Z", 2, 10), arm("T3", "Y", 5, 10),
                arm("T2", "Z", 4, 10), arm("T2", "Y", 3, 10),
                arm("T1", "Z", 1, 10), arm("T1", "Y", 6, 10)}, "Z");
  const FitResult res2 = fit(renamed, tight_options());
  const PhiEstimate perm = fletcher_phi(renamed, res2);
  CHECK(base.phi_raw == doctest::Approx(perm.phi_raw).epsilon(1e-9));
  CHECK(base.phi == doctest::Approx(perm.phi).epsilon(1e-9));
}

TEST_CASE("inflate scales the covariance and nothing else") {
  const Network net = testing::triangle_toy();
  const FitResult res = fit(net, tight_options());

  const FitResult same = inflate(res, 1.0);
  CHECK(same.cov == res.cov);
  CHECK(same.theta_hat == res.theta_hat);

  const FitResult wide = inflate(res, 4.0);
  for (int i = 0; i < res.cov.rows(); ++i) {
    CHECK(std::sqrt(wide.cov(i, i)) == 2.0 * std::sqrt(res.cov(i, i)));
    CHECK(wide.theta_hat(i) == res.theta_hat(i));
  }
  CHECK_THROWS_AS(inflate(res, 0.99), PhiOutOfRange);
}

TEST_CASE("inflating a Wald table widens intervals by sqrt(phi)") {
  const Network net = testing::triangle_toy();
  const DesignMatrix dm = build(net);
  const FitResult res = fit(net, dm, tight_options());
  const ContrastTable base = league_table(net, dm, res, CiKind::wald);
  const ContrastTable wide = inflate(base, 4.0);
  for (std::size_t i = 0; i < base.rows().size(); ++i) {
    const auto& b = base.rows()[i];
    const auto& w = wide.rows()[i];
    CHECK(w.estimate == b.estimate);
    CHECK(w.se == 2.0 * b.se);
    CHECK(w.ci_high - w.ci_low ==
          doctest::Approx(2.0 * (b.ci_high - b.ci_low)).epsilon(1e-12));
  }
}
