#ifndef PLNMA_NETDATA_HPP
#define PLNMA_NETDATA_HPP

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace plnma {

// One trial arm: counts r (events) out of n (participants).
struct ArmRecord {
  std::string study_id;
  std::string treatment_id;
  long long events = 0;
  long long sample_size = 0;
};

// Arm inside a validated Network; treatment is a canonical index.
struct StudyArm {
  int treatment = 0;
  long long events = 0;
  long long sample_size = 0;
};

struct Study {
  std::string id;
  std::vector<StudyArm> arms;  // sorted by treatment index

  bool all_zero() const;
  int num_arms() const { return static_cast<int>(arms.size()); }
};

// Immutable arm-level dataset with canonical ordering: treatments sorted by
// label, studies sorted by id, arms sorted by treatment within each study.
class Network {
 public:
  const std::vector<std::string>& treatments() const { return treatments_; }
  const std::vector<Study>& studies() const { return studies_; }

  int num_treatments() const { return static_cast<int>(treatments_.size()); }
  int num_studies() const { return static_cast<int>(studies_.size()); }
  int arm_total() const { return arm_total_; }

  int reference() const { return reference_; }
  const std::string& reference_label() const { return treatments_[reference_]; }

  int treatment_index(const std::string& label) const;  // throws UnknownTreatment
  const std::string& treatment_label(int index) const { return treatments_[index]; }

  // Column of the basic parameter d(ref,t) in the design matrix, offset past
  // the N study intercepts; -1 for the reference itself.
  int basic_param_column(int treatment_index) const;

  Network with_reference(const std::string& label) const;

  // Canonical flat record form; validate() of this is the identity.
  std::vector<ArmRecord> to_records() const;

  friend Network validate(const std::vector<ArmRecord>& records,
                          const std::optional<std::string>& reference);

 private:
  std::vector<std::string> treatments_;
  std::vector<Study> studies_;
  int reference_ = 0;
  int arm_total_ = 0;
};

Network validate(const std::vector<ArmRecord>& records,
                 const std::optional<std::string>& reference = std::nullopt);

// Study ids whose every arm reports zero events.
std::vector<std::string> all_zero_studies(const Network& net);

// Connected components of the treatment graph; edges join treatments that
// co-occur in a retained study. With drop_all_zero, all-zero studies are not
// retained and their treatments may end up isolated.
std::vector<std::vector<std::string>> connectivity(const Network& net,
                                                   bool drop_all_zero);

bool is_connected(const Network& net, bool drop_all_zero = false);

// Network without its all-zero studies. Refuses to silently lose a treatment
// or split the graph: throws DisconnectedNetwork if the remaining studies do
// not connect the original treatment set.
Network drop_all_zero_studies(const Network& net);

// Arms with events == 0 (zero cells on the event side).
int zero_event_arm_count(const Network& net);

// CSV ingestion: header "study,treatment,events,n", one row per arm.
std::vector<ArmRecord> read_arm_csv(std::istream& in);

}  // namespace plnma

#endif  // PLNMA_NETDATA_HPP
