#ifndef PLNMA_DESIGN_HPP
#define PLNMA_DESIGN_HPP

#include <Eigen/Core>
#include <string>
#include <utility>
#include <vector>

#include "plnma/netdata.hpp"

namespace plnma {

// 0/1 design matrix of the one-stage NMA logistic model. Row a corresponds to
// one arm; its linear predictor is alpha_i + d(ref, k). Columns: N study
// intercepts, then T-1 basic parameters in treatment label order. Event and
// trial counts are carried alongside, aligned with the rows.
struct DesignMatrix {
  Eigen::MatrixXd Z;
  Eigen::VectorXd events;
  Eigen::VectorXd trials;
  std::vector<std::string> col_labels;
  std::vector<std::pair<std::string, std::string>> row_labels;  // (study, treatment)
  int n_studies = 0;
  int n_treatments = 0;
  int reference = 0;

  int arms() const { return static_cast<int>(Z.rows()); }
  int params() const { return static_cast<int>(Z.cols()); }
};

// Throws DisconnectedNetwork when contrasts are not estimable.
DesignMatrix build(const Network& net);

}  // namespace plnma

#endif  // PLNMA_DESIGN_HPP
