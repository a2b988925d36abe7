#include "plnma/design.hpp"

#include "plnma/errors.hpp"

namespace plnma {

DesignMatrix build(const Network& net) {
  if (!is_connected(net)) {
    throw DisconnectedNetwork("design matrix requires a connected network");
  }
  const int n = net.arm_total();
  const int p = net.num_studies() + net.num_treatments() - 1;

  DesignMatrix dm;
  dm.Z = Eigen::MatrixXd::Zero(n, p);
  dm.events.resize(n);
  dm.trials.resize(n);
  dm.n_studies = net.num_studies();
  dm.n_treatments = net.num_treatments();
  dm.reference = net.reference();
  dm.col_labels.reserve(static_cast<std::size_t>(p));
  dm.row_labels.reserve(static_cast<std::size_t>(n));

  for (const Study& s : net.studies()) {
    dm.col_labels.push_back("alpha[" + s.id + "]");
  }
  for (int t = 0; t < net.num_treatments(); ++t) {
    if (t == net.reference()) continue;
    dm.col_labels.push_back("d[" + net.reference_label() + ":" +
                            net.treatment_label(t) + "]");
  }

  int row = 0;
  for (int i = 0; i < net.num_studies(); ++i) {
    const Study& s = net.studies()[i];
    for (const StudyArm& a : s.arms) {
      dm.Z(row, i) = 1.0;
      const int c = net.basic_param_column(a.treatment);
      if (c >= 0) dm.Z(row, c) = 1.0;
      dm.events(row) = static_cast<double>(a.events);
      dm.trials(row) = static_cast<double>(a.sample_size);
      dm.row_labels.emplace_back(s.id, net.treatment_label(a.treatment));
      ++row;
    }
  }
  return dm;
}

}  // namespace plnma
