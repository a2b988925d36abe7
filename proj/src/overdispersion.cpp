#include "plnma/overdispersion.hpp"

#include <cmath>

#include "plnma/errors.hpp"

namespace plnma {

std::string df_mode_name(DfMode mode) {
  return mode == DfMode::paper ? "paper" : "residual";
}

namespace {

struct ArmResiduals {
  double pearson = 0.0;
  double s_sum = 0.0;
  int arms = 0;
};

ArmResiduals accumulate(const Network& net, const FitResult& fit) {
  ArmResiduals acc;
  int row = 0;
  for (const Study& s : net.studies()) {
    for (const StudyArm& a : s.arms) {
      const double n = static_cast<double>(a.sample_size);
      const double r = static_cast<double>(a.events);
      const double p = fit.p_hat(row);
      const double v = n * p * (1.0 - p);
      if (!(v > 0.0)) {
        throw DegenerateFit("fitted variance is zero for study '" + s.id +
                            "', treatment '" + net.treatment_label(a.treatment) +
                            "'");
      }
      const double resid = r - n * p;
      acc.pearson += resid * resid / v;
      acc.s_sum += n * (1.0 - 2.0 * p) * resid / v;  // (dv/dp) resid / v
      ++acc.arms;
      ++row;
    }
  }
  return acc;
}

}  // namespace

double pearson_statistic(const Network& net, const FitResult& fit) {
  return accumulate(net, fit).pearson;
}

PhiEstimate fletcher_phi(const Network& net, const FitResult& fit, DfMode mode) {
  const ArmResiduals acc = accumulate(net, fit);

  PhiEstimate est;
  est.df_mode = mode;
  est.pearson = acc.pearson;
  est.s_bar = acc.s_sum / static_cast<double>(acc.arms);
  est.m = mode == DfMode::paper
              ? (net.num_treatments() - 1) + (net.num_studies() - 1)
              : net.arm_total() - (net.num_studies() + net.num_treatments() - 1);
  if (est.m < 1) {
    throw DegenerateFit("no degrees of freedom left for overdispersion (m = " +
                        std::to_string(est.m) + ")");
  }
  const double denom = 1.0 + est.s_bar;
  if (denom <= 0.0) {
    est.negative_denominator = true;
    est.phi_raw = 0.0;
    est.phi = 1.0;
    return est;
  }
  est.phi_raw = (est.pearson / static_cast<double>(est.m)) / denom;
  est.phi = est.phi_raw < 1.0 ? 1.0 : est.phi_raw;
  return est;
}

FitResult inflate(const FitResult& fit, double phi) {
  if (phi < 1.0) throw PhiOutOfRange("phi must be >= 1");
  if (phi == 1.0) return fit;
  FitResult out = fit;
  out.cov *= phi;
  return out;
}

ContrastTable inflate(const ContrastTable& table, double phi) {
  if (phi < 1.0) throw PhiOutOfRange("phi must be >= 1");
  if (phi == 1.0) return table;
  const double s = std::sqrt(phi);
  std::vector<ContrastRow> rows = table.rows();
  for (ContrastRow& r : rows) {
    if (r.ci_kind != CiKind::wald) continue;
    r.se *= s;
    r.ci_low = r.estimate - s * (r.estimate - r.ci_low);
    r.ci_high = r.estimate + s * (r.ci_high - r.estimate);
    r.phi_applied *= phi;
  }
  return ContrastTable(std::move(rows));
}

}  // namespace plnma
