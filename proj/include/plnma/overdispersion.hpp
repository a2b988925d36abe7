#ifndef PLNMA_OVERDISPERSION_HPP
#define PLNMA_OVERDISPERSION_HPP

#include <string>

#include "plnma/inference.hpp"
#include "plnma/netdata.hpp"
#include "plnma/plfit.hpp"

namespace plnma {

// Degrees of freedom for phi_P = P / m: "paper" uses (T-1) + (N-1),
// "residual" the conventional observations-minus-parameters count.
enum class DfMode { paper, residual };

std::string df_mode_name(DfMode mode);

struct PhiEstimate {
  double phi_raw = 0.0;   // Fletcher value before clamping
  double phi = 1.0;       // max(1, phi_raw)
  double pearson = 0.0;
  double s_bar = 0.0;
  DfMode df_mode = DfMode::paper;
  int m = 1;
  bool negative_denominator = false;  // 1 + s_bar <= 0; phi forced to 1
};

// Pearson statistic: sum of squared raw residuals over fitted variances.
double pearson_statistic(const Network& net, const FitResult& fit);

// Fletcher's overdispersion estimate phi = (P/m) / (1 + s_bar), clamped to 1.
PhiEstimate fletcher_phi(const Network& net, const FitResult& fit,
                         DfMode mode = DfMode::paper);

// Multiply the covariance (hence squared SEs) by phi >= 1. Point estimates
// are bit-identical to the input.
FitResult inflate(const FitResult& fit, double phi);

// Same for a Wald contrast table: SEs scaled by sqrt(phi), intervals rescaled
// about the untouched estimates. Profile rows are not scaled.
ContrastTable inflate(const ContrastTable& table, double phi);

}  // namespace plnma

#endif  // PLNMA_OVERDISPERSION_HPP
