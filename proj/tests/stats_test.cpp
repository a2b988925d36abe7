#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "plnma/stats.hpp"

using namespace plnma;

TEST_CASE("normal quantile hits known values") {
  CHECK(stats::normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(stats::normal_quantile(0.975) ==
        doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(stats::normal_quantile(0.995) ==
        doctest::Approx(2.575829303548901).epsilon(1e-12));
  CHECK(stats::normal_quantile(0.0013498980316300945) ==
        doctest::Approx(-3.0).epsilon(1e-12));
}

TEST_CASE("normal quantile round-trips through the erfc CDF") {
  for (double p : {1e-8, 1e-4, 0.01, 0.2, 0.5, 0.77, 0.999, 1.0 - 1e-9}) {
    const double x = stats::normal_quantile(p);
    CHECK(stats::normal_cdf(x) == doctest::Approx(p).epsilon(1e-11));
  }
}

TEST_CASE("normal quantile is antisymmetric") {
  for (double p : {0.001, 0.1, 0.25, 0.45}) {
    CHECK(stats::normal_quantile(p) ==
          doctest::Approx(-stats::normal_quantile(1.0 - p)).epsilon(1e-13));
  }
}

TEST_CASE("normal quantile rejects the boundary") {
  CHECK_THROWS_AS(stats::normal_quantile(0.0), std::domain_error);
  CHECK_THROWS_AS(stats::normal_quantile(1.0), std::domain_error);
}

TEST_CASE("chi-square quantile with 1 df") {
  // 3.841459 is the conventional 6-decimal value of the 95% quantile.
  CHECK(std::abs(stats::chi_square_quantile_1df(0.95) - 3.841459) < 1e-5);
  CHECK(stats::chi_square_quantile_1df(0.95) ==
        doctest::Approx(3.841458820694124).epsilon(1e-10));
  const double z99 = stats::normal_quantile(0.995);
  CHECK(stats::chi_square_quantile_1df(0.99) ==
        doctest::Approx(z99 * z99).epsilon(1e-14));
}

TEST_CASE("five-number summary uses interpolated quartiles") {
  const auto f = stats::five_number({3, 1, 2, 4, 5});
  CHECK(f.min == 1);
  CHECK(f.q1 == 2);
  CHECK(f.median == 3);
  CHECK(f.q3 == 4);
  CHECK(f.max == 5);

  const auto g = stats::five_number({0, 1, 1, 2});
  CHECK(g.median == 1.0);
  CHECK(g.q1 == doctest::Approx(0.75));
  CHECK(g.q3 == doctest::Approx(1.25));
}

TEST_CASE("mean and sample sd") {
  CHECK(stats::mean({1, 2, 3, 4}) == doctest::Approx(2.5));
  CHECK(stats::sample_sd({2, 4, 4, 4, 5, 5, 7, 9}) ==
        doctest::Approx(std::sqrt(32.0 / 7.0)).epsilon(1e-14));
}
