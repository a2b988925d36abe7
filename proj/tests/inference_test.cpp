#include <doctest.h>

#include <cmath>

#include "plnma/design.hpp"
#include "plnma/errors.hpp"
#include "plnma/inference.hpp"
#include "plnma/stats.hpp"
#include "test_helpers.hpp"

using namespace plnma;
using plnma::testing::arm;

TEST_CASE("wald interval is estimate +/- z se") {
  const Network net = testing::pair_toy();
  const FitResult res = fit(net, tight_options());
  const double se = std::sqrt(res.cov(1, 1));
  const Interval ci = wald_ci(res, 1);
  CHECK(ci.lo == doctest::Approx(res.theta_hat(1) - 1.959963984540054 * se)
                     .epsilon(1e-10));
  CHECK(ci.hi == doctest::Approx(res.theta_hat(1) + 1.959963984540054 * se)
                     .epsilon(1e-10));
  // quantile monotonicity
  const Interval narrow = wald_ci(res, 1, 0.5);
  CHECK(narrow.length() < ci.length());
  // degenerate SE gives a degenerate interval
  FitResult degen = res;
  degen.cov(1, 1) = 0.0;
  const Interval point = wald_ci(degen, 1);
  CHECK(point.lo == point.hi);
}

TEST_CASE("wald interval refuses non-converged fits") {
  FitResult res = fit(testing::pair_toy(), FitOptions{});
  res.converged = false;
  CHECK_THROWS_AS(wald_ci(res, 1), NotConvergedFit);
}

TEST_CASE("contrast basics") {
  const Network net = testing::triangle_toy();
  const FitResult res = fit(net, tight_options());

  const auto self = contrast(net, res, "B", "B");
  CHECK(self.first == 0.0);
  CHECK(self.second == 0.0);

  const auto vs_ref = contrast(net, res, "A", "B");
  CHECK(vs_ref.first == res.theta_hat(3));
  CHECK(vs_ref.second == doctest::Approx(std::sqrt(res.cov(3, 3))));

  CHECK_THROWS_AS(contrast(net, res, "A", "Z"), UnknownTreatment);
}

TEST_CASE("non-reference contrast variance via the quadratic form") {
  const Network net = testing::triangle_toy();
  const FitResult res = fit(net, tight_options());
  const auto bc = contrast(net, res, "B", "C");
  const double expected_var = res.cov(3, 3) + res.cov(4, 4) - 2.0 * res.cov(3, 4);
  CHECK(bc.second == doctest::Approx(std::sqrt(expected_var)).epsilon(1e-12));

  // cross-check against refitting with B as reference
  const Network re = net.with_reference("B");
  const FitResult res2 = fit(re, tight_options());
  const auto bc2 = contrast(re, res2, "B", "C");
  CHECK(bc.first == doctest::Approx(bc2.first).epsilon(1e-8));
  CHECK(bc.second == doctest::Approx(bc2.second).epsilon(1e-8));
}

TEST_CASE("consistency closure and reference invariance") {
  const Network net = testing::quad_toy();
  const FitResult res = fit(net, tight_options());

  const double ab = contrast(net, res, "A", "B").first;
  const double bc = contrast(net, res, "B", "C").first;
  const double ac = contrast(net, res, "A", "C").first;
  CHECK(std::abs(ac - (ab + bc)) < 1e-12);

  const Network re = net.with_reference("C");
  const FitResult res2 = fit(re, tight_options());
  for (const auto& t1 : net.treatments()) {
    for (const auto& t2 : net.treatments()) {
      const auto c1 = contrast(net, res, t1, t2);
      const auto c2 = contrast(re, res2, t1, t2);
      CHECK(c1.first == doctest::Approx(c2.first).epsilon(1e-8));
      CHECK(c1.second == doctest::Approx(c2.second).epsilon(1e-8));
    }
  }
}

TEST_CASE("profile interval endpoints sit on the deviance threshold") {
  const Network net = testing::pair_toy();
  const DesignMatrix dm = build(net);
  const FitResult res = fit(net, dm, tight_options());
  const Interval ci = profile_ci(net, dm, res, 1);

  CHECK(ci.lo < res.theta_hat(1));
  CHECK(ci.hi > res.theta_hat(1));

  const double lmax = penalized_log_likelihood(dm, res.theta_hat);
  for (double endpoint : {ci.lo, ci.hi}) {
    const ConstrainedFit cf =
        fit_with_fixed(dm, 1, endpoint, res.theta_hat, tight_options());
    REQUIRE(cf.converged);
    const double dev = 2.0 * (lmax - cf.penalized_loglik);
    CHECK(std::abs(dev - 3.841459) < 1e-3);
  }
}

TEST_CASE("profile interval of a symmetric double-zero study is symmetric") {
  const Network net = validate({arm("S1", "A", 0, 10), arm("S1", "B", 0, 10)});
  const DesignMatrix dm = build(net);
  const FitResult res = fit(net, dm, tight_options());
  const Interval ci = profile_ci(net, dm, res, 1);
  CHECK(std::abs(ci.lo + ci.hi) < 1e-3);
  CHECK(ci.hi > 0.0);
}

TEST_CASE("profile contrast falls back to a reparametrized fit") {
  const Network net = testing::triangle_toy();
  const DesignMatrix dm = build(net);
  const FitResult res = fit(net, dm, tight_options());
  const Interval bc = profile_contrast(net, dm, res, "B", "C");
  const auto est = contrast(net, res, "B", "C").first;
  CHECK(bc.lo < est);
  CHECK(bc.hi > est);

  // direct profile on the reparametrized model must agree
  const Network re = net.with_reference("B");
  const DesignMatrix redm = build(re);
  const FitResult res2 = fit(re, redm, tight_options());
  const Interval direct =
      profile_ci(re, redm, res2, re.basic_param_column(re.treatment_index("C")));
  CHECK(bc.lo == doctest::Approx(direct.lo).epsilon(1e-6));
  CHECK(bc.hi == doctest::Approx(direct.hi).epsilon(1e-6));
}

TEST_CASE("league table enumerates all unordered pairs consistently") {
  const Network net = testing::quad_toy();
  const DesignMatrix dm = build(net);
  const FitResult res = fit(net, dm, tight_options());
  const ContrastTable table = league_table(net, dm, res, CiKind::wald);
  CHECK(table.rows().size() == 6);  // T=4 -> 6 pairs

  // vs-reference rows match wald_ci on the basic parameters
  for (int t = 0; t < net.num_treatments(); ++t) {
    if (t == net.reference()) continue;
    const ContrastRow row = table.row("A", net.treatment_label(t));
    const Interval ci = wald_ci(res, net.basic_param_column(t));
    CHECK(row.ci_low == doctest::Approx(ci.lo).epsilon(1e-12));
    CHECK(row.ci_high == doctest::Approx(ci.hi).epsilon(1e-12));
  }

  // antisymmetry through the ordered accessor
  const ContrastRow bd = table.row("B", "D");
  const ContrastRow db = table.row("D", "B");
  CHECK(bd.estimate == -db.estimate);
  CHECK(bd.se == db.se);
  CHECK(bd.ci_low == -db.ci_high);
  CHECK(bd.ci_high == -db.ci_low);
}

TEST_CASE("league table on a two-treatment network is the single contrast") {
  const Network net = testing::pair_toy();
  const DesignMatrix dm = build(net);
  const FitResult res = fit(net, dm, tight_options());
  const ContrastTable table = league_table(net, dm, res, CiKind::wald);
  REQUIRE(table.rows().size() == 1);
  CHECK(table.rows()[0].estimate ==
        doctest::Approx(contrast(net, res, "A", "B").first));
}

TEST_CASE("phi inflates Wald league SEs by sqrt(phi)") {
  const Network net = testing::triangle_toy();
  const DesignMatrix dm = build(net);
  const FitResult res = fit(net, dm, tight_options());
  const ContrastTable base = league_table(net, dm, res, CiKind::wald, 0.95, 1.0);
  const ContrastTable wide = league_table(net, dm, res, CiKind::wald, 0.95, 4.0);
  for (std::size_t i = 0; i < base.rows().size(); ++i) {
    CHECK(wide.rows()[i].estimate == base.rows()[i].estimate);
    CHECK(wide.rows()[i].se == doctest::Approx(2.0 * base.rows()[i].se));
    CHECK(wide.rows()[i].phi_applied == 4.0);
  }
  CHECK_THROWS_AS(league_table(net, dm, res, CiKind::wald, 0.95, 0.5),
                  PhiOutOfRange);
}

TEST_CASE("interval covers uses closed endpoints") {
  const Interval ci{-1.0, 2.0};
  CHECK(ci.covers(-1.0));
  CHECK(ci.covers(2.0));
  CHECK(ci.covers(0.0));
  CHECK(!ci.covers(2.0000001));
}
