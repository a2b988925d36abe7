#include "plnma/netdata.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "plnma/errors.hpp"

namespace plnma {

bool Study::all_zero() const {
  return std::all_of(arms.begin(), arms.end(),
                     [](const StudyArm& a) { return a.events == 0; });
}

int Network::treatment_index(const std::string& label) const {
  const auto it = std::lower_bound(treatments_.begin(), treatments_.end(), label);
  if (it == treatments_.end() || *it != label) {
    throw UnknownTreatment("unknown treatment '" + label + "'");
  }
  return static_cast<int>(it - treatments_.begin());
}

int Network::basic_param_column(int treatment_index) const {
  if (treatment_index == reference_) return -1;
  const int rank = treatment_index < reference_ ? treatment_index : treatment_index - 1;
  return num_studies() + rank;
}

Network Network::with_reference(const std::string& label) const {
  Network out = *this;
  out.reference_ = treatment_index(label);
  return out;
}

std::vector<ArmRecord> Network::to_records() const {
  std::vector<ArmRecord> out;
  out.reserve(static_cast<std::size_t>(arm_total_));
  for (const Study& s : studies_) {
    for (const StudyArm& a : s.arms) {
      out.push_back({s.id, treatments_[a.treatment], a.events, a.sample_size});
    }
  }
  return out;
}

Network validate(const std::vector<ArmRecord>& records,
                 const std::optional<std::string>& reference) {
  if (records.empty()) {
    throw ValidationError("empty record collection");
  }

  for (const ArmRecord& r : records) {
    if (r.sample_size < 1) {
      throw CountOutOfRange("study '" + r.study_id + "', treatment '" +
                            r.treatment_id + "': sample_size must be >= 1");
    }
    if (r.events < 0 || r.events > r.sample_size) {
      throw CountOutOfRange("study '" + r.study_id + "', treatment '" +
                            r.treatment_id + "': events must lie in [0, n]");
    }
  }

  std::set<std::string> labels;
  for (const ArmRecord& r : records) labels.insert(r.treatment_id);

  Network net;
  net.treatments_.assign(labels.begin(), labels.end());

  const std::string ref_label = reference.value_or(net.treatments_.front());
  if (!labels.count(ref_label)) {
    throw UnknownReference("reference treatment '" + ref_label +
                           "' does not occur in the data");
  }
  net.reference_ = static_cast<int>(
      std::lower_bound(net.treatments_.begin(), net.treatments_.end(), ref_label) -
      net.treatments_.begin());

  std::map<std::string, std::vector<StudyArm>> grouped;
  for (const ArmRecord& r : records) {
    const int t = net.treatment_index(r.treatment_id);
    auto& arms = grouped[r.study_id];
    for (const StudyArm& a : arms) {
      if (a.treatment == t) {
        throw DuplicateArm("duplicate arm (study '" + r.study_id +
                           "', treatment '" + r.treatment_id + "')");
      }
    }
    arms.push_back({t, r.events, r.sample_size});
  }

  for (auto& [id, arms] : grouped) {
    if (arms.size() < 2) {
      throw SingleArmStudy("study '" + id + "' has fewer than 2 arms");
    }
    std::sort(arms.begin(), arms.end(),
              [](const StudyArm& a, const StudyArm& b) {
                return a.treatment < b.treatment;
              });
    net.studies_.push_back({id, std::move(arms)});
    net.arm_total_ += net.studies_.back().num_arms();
  }
  return net;
}

std::vector<std::string> all_zero_studies(const Network& net) {
  std::vector<std::string> out;
  for (const Study& s : net.studies()) {
    if (s.all_zero()) out.push_back(s.id);
  }
  return out;
}

namespace {

// Union-find over treatment indices.
class DisjointSets {
 public:
  explicit DisjointSets(int n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  int find(int x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(int a, int b) { parent_[find(a)] = find(b); }

 private:
  std::vector<int> parent_;
};

}  // namespace

std::vector<std::vector<std::string>> connectivity(const Network& net,
                                                   bool drop_all_zero) {
  DisjointSets ds(net.num_treatments());
  for (const Study& s : net.studies()) {
    if (drop_all_zero && s.all_zero()) continue;
    for (std::size_t k = 1; k < s.arms.size(); ++k) {
      ds.unite(s.arms[k - 1].treatment, s.arms[k].treatment);
    }
  }
  std::map<int, std::vector<std::string>> groups;
  for (int t = 0; t < net.num_treatments(); ++t) {
    groups[ds.find(t)].push_back(net.treatment_label(t));
  }
  std::vector<std::vector<std::string>> out;
  for (auto& [root, members] : groups) out.push_back(std::move(members));
  std::sort(out.begin(), out.end());
  return out;
}

bool is_connected(const Network& net, bool drop_all_zero) {
  return connectivity(net, drop_all_zero).size() == 1;
}

Network drop_all_zero_studies(const Network& net) {
  if (!is_connected(net, /*drop_all_zero=*/true)) {
    throw DisconnectedNetwork(
        "network becomes disconnected after removing all-zero studies");
  }
  std::vector<ArmRecord> kept;
  for (const Study& s : net.studies()) {
    if (s.all_zero()) continue;
    for (const StudyArm& a : s.arms) {
      kept.push_back({s.id, net.treatment_label(a.treatment), a.events,
                      a.sample_size});
    }
  }
  return validate(kept, net.reference_label());
}

int zero_event_arm_count(const Network& net) {
  int c = 0;
  for (const Study& s : net.studies()) {
    for (const StudyArm& a : s.arms) {
      if (a.events == 0) ++c;
    }
  }
  return c;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

long long parse_count(const std::string& s, const std::string& what, int line_no) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) + ": cannot parse " +
                     what + " from '" + s + "'");
  }
}

}  // namespace

std::vector<ArmRecord> read_arm_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError("empty CSV input");
  }
  const auto header = split_csv_line(line);
  const std::vector<std::string> expected = {"study", "treatment", "events", "n"};
  if (header != expected) {
    throw ParseError("CSV header must be exactly 'study,treatment,events,n'");
  }
  std::vector<ArmRecord> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 4) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": expected 4 fields, got " + std::to_string(f.size()));
    }
    if (f[0].empty() || f[1].empty()) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": study and treatment labels must be non-empty");
    }
    out.push_back({f[0], f[1], parse_count(f[2], "events", line_no),
                   parse_count(f[3], "n", line_no)});
  }
  return out;
}

}  // namespace plnma
