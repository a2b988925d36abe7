#include "plnma/ivcomparator.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "plnma/errors.hpp"

namespace plnma {

namespace {

// Map a treatment index to the basic-parameter design row entry: the X row of
// contrast (baseline -> arm) is e[arm] - e[baseline] with e[ref] = 0.
void add_basic_indicator(Eigen::RowVectorXd& x, const Network& net, int treatment,
                         double sign) {
  const int c = net.basic_param_column(treatment);
  if (c >= 0) x(c - net.num_studies()) += sign;
}

Eigen::MatrixXd block_x(const StudyContrastBlock& b, const Network& net) {
  const int p = net.num_treatments() - 1;
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(b.y.size(), p);
  for (int k = 0; k < b.y.size(); ++k) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(p);
    add_basic_indicator(row, net, b.arms[static_cast<std::size_t>(k)], +1.0);
    add_basic_indicator(row, net, b.baseline, -1.0);
    x.row(k) = row;
  }
  return x;
}

void check_connected_after_exclusion(const std::vector<StudyContrastBlock>& blocks,
                                     const Network& net) {
  const int t = net.num_treatments();
  std::vector<int> parent(static_cast<std::size_t>(t));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      x = parent[static_cast<std::size_t>(x)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
    }
    return x;
  };
  for (const auto& b : blocks) {
    for (int a : b.arms) parent[static_cast<std::size_t>(find(a))] = find(b.baseline);
  }
  for (int i = 1; i < t; ++i) {
    if (find(i) != find(0)) {
      throw DisconnectedAfterExclusion(
          "treatments are no longer connected once all-zero studies are "
          "excluded");
    }
  }
}

Eigen::MatrixXd unit_structure(int k) {
  // Random-effects structure of a block: 1 on the diagonal, 1/2 off it.
  return 0.5 * (Eigen::MatrixXd::Identity(k, k) + Eigen::MatrixXd::Ones(k, k));
}

GlsFit solve_gls(const std::vector<StudyContrastBlock>& blocks, const Network& net,
                 double tau2) {
  const int p = net.num_treatments() - 1;
  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
  for (const auto& b : blocks) {
    const Eigen::MatrixXd x = block_x(b, net);
    Eigen::MatrixXd v = b.V;
    if (tau2 > 0.0) {
      v += tau2 * unit_structure(static_cast<int>(b.y.size()));
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(v);
    if (llt.info() != Eigen::Success) {
      throw SingularInformation("within-study covariance is not positive "
                                "definite in study '" + b.study_id + "'");
    }
    info += x.transpose() * llt.solve(x);
    rhs += x.transpose() * llt.solve(b.y);
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(info);
  if (llt.info() != Eigen::Success) {
    throw SingularInformation("GLS normal equations are singular");
  }
  GlsFit fit;
  fit.d_hat = llt.solve(rhs);
  fit.cov = llt.solve(Eigen::MatrixXd::Identity(p, p));
  fit.tau2 = tau2;
  fit.blocks_used = static_cast<int>(blocks.size());
  return fit;
}

}  // namespace

std::optional<StudyContrastBlock> study_contrasts(const Study& study,
                                                  const Network& net) {
  if (study.all_zero()) return std::nullopt;

  const bool corrected =
      std::any_of(study.arms.begin(), study.arms.end(), [](const StudyArm& a) {
        return a.events == 0 || a.events == a.sample_size;
      });
  const double add = corrected ? 0.5 : 0.0;

  // Baseline: the network reference when present, else the lowest index.
  std::size_t base_pos = 0;
  for (std::size_t k = 0; k < study.arms.size(); ++k) {
    if (study.arms[k].treatment == net.reference()) base_pos = k;
  }

  const StudyArm& base = study.arms[base_pos];
  const double rb = static_cast<double>(base.events) + add;
  const double sb = static_cast<double>(base.sample_size - base.events) + add;

  StudyContrastBlock block;
  block.study_id = study.id;
  block.baseline = base.treatment;
  block.corrected = corrected;

  const int k = study.num_arms() - 1;
  block.y.resize(k);
  block.V.resize(k, k);
  const double base_var = 1.0 / rb + 1.0 / sb;  // shared across contrasts

  int row = 0;
  for (std::size_t a = 0; a < study.arms.size(); ++a) {
    if (a == base_pos) continue;
    const StudyArm& arm = study.arms[a];
    const double r = static_cast<double>(arm.events) + add;
    const double s = static_cast<double>(arm.sample_size - arm.events) + add;
    block.arms.push_back(arm.treatment);
    block.y(row) = std::log(r * sb) - std::log(rb * s);
    block.V(row, row) = 1.0 / r + 1.0 / s + base_var;
    for (int other = 0; other < row; ++other) {
      block.V(row, other) = base_var;
      block.V(other, row) = base_var;
    }
    ++row;
  }
  return block;
}

GlsFit gls_fit(const std::vector<StudyContrastBlock>& blocks, const Network& net) {
  if (blocks.empty()) {
    throw InsufficientStudies("no studies usable by the inverse-variance model");
  }
  check_connected_after_exclusion(blocks, net);
  return solve_gls(blocks, net, 0.0);
}

double dl_tau2(const std::vector<StudyContrastBlock>& blocks, const Network& net,
               const GlsFit& common) {
  if (blocks.size() < 2) {
    throw InsufficientStudies("tau^2 estimation needs at least 2 studies");
  }
  const int p = net.num_treatments() - 1;

  // Q = (y - X d)' V^-1 (y - X d); E[Q] = df + tau^2 tr(P Delta) with
  // P = A - A X (X'AX)^-1 X' A, A = blockdiag(V^-1), Delta the unit structure.
  double q = 0.0;
  int n_contrasts = 0;
  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(p, p);
  double tr_a_delta = 0.0;
  Eigen::MatrixXd mid = Eigen::MatrixXd::Zero(p, p);  // X'A Delta A X
  for (const auto& b : blocks) {
    const Eigen::MatrixXd x = block_x(b, net);
    const Eigen::LLT<Eigen::MatrixXd> llt(b.V);
    if (llt.info() != Eigen::Success) {
      throw SingularInformation("within-study covariance is not positive "
                                "definite in study '" + b.study_id + "'");
    }
    const Eigen::VectorXd resid = b.y - x * common.d_hat;
    q += resid.dot(llt.solve(resid));
    n_contrasts += static_cast<int>(b.y.size());

    const Eigen::MatrixXd delta = unit_structure(static_cast<int>(b.y.size()));
    const Eigen::MatrixXd vinv_x = llt.solve(x);
    info += x.transpose() * vinv_x;
    tr_a_delta += llt.solve(delta).trace();
    mid += vinv_x.transpose() * delta * vinv_x;
  }
  const double df = static_cast<double>(n_contrasts - p);
  const Eigen::LLT<Eigen::MatrixXd> llt(info);
  const double trace_corr = tr_a_delta - llt.solve(mid).trace();
  if (!(trace_corr > 1e-12)) return 0.0;
  return std::max(0.0, (q - df) / trace_corr);
}

GlsFit iv_fit(const Network& net, bool random_effects) {
  std::vector<StudyContrastBlock> blocks;
  int excluded = 0;
  for (const Study& s : net.studies()) {
    if (auto b = study_contrasts(s, net)) {
      blocks.push_back(std::move(*b));
    } else {
      ++excluded;
    }
  }
  if (blocks.empty()) {
    throw InsufficientStudies("all studies are excluded (zero events in every "
                              "arm everywhere)");
  }
  check_connected_after_exclusion(blocks, net);

  GlsFit common = solve_gls(blocks, net, 0.0);
  common.excluded_studies = excluded;
  if (!random_effects) return common;

  const double tau2 = dl_tau2(blocks, net, common);
  GlsFit re = solve_gls(blocks, net, tau2);
  re.excluded_studies = excluded;
  return re;
}

}  // namespace plnma
