#ifndef PLNMA_STATS_HPP
#define PLNMA_STATS_HPP

#include <vector>

namespace plnma::stats {

// Inverse standard normal CDF (Wichura's AS 241, PPND16 variant).
// Absolute error below 1e-15 over (0,1). Throws std::domain_error outside.
double normal_quantile(double p);

// Standard normal CDF via erfc.
double normal_cdf(double x);

// Chi-square quantile with 1 degree of freedom: the squared normal quantile.
double chi_square_quantile_1df(double p);

// Type-7 (linear interpolation) sample quantile of an already sorted vector.
double quantile_sorted(const std::vector<double>& sorted, double p);

struct FiveNumber {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

FiveNumber five_number(std::vector<double> values);

double mean(const std::vector<double>& v);
double sample_sd(const std::vector<double>& v);  // n-1 denominator

}  // namespace plnma::stats

#endif  // PLNMA_STATS_HPP
