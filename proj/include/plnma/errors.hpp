#ifndef PLNMA_ERRORS_HPP
#define PLNMA_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <utility>

namespace plnma {

// All engine errors carry a machine-readable category used by the CLI for
// exit codes: "parse", "validation", "disconnection", "convergence".
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& what)
      : std::runtime_error(what), category_(std::move(category)) {}
  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

struct ParseError : Error {
  explicit ParseError(const std::string& w) : Error("parse", w) {}
};
struct ConfigInvalid : Error {
  explicit ConfigInvalid(const std::string& w) : Error("parse", w) {}
};

struct ValidationError : Error {
  explicit ValidationError(const std::string& w) : Error("validation", w) {}
};
struct DuplicateArm : ValidationError {
  explicit DuplicateArm(const std::string& w) : ValidationError(w) {}
};
struct SingleArmStudy : ValidationError {
  explicit SingleArmStudy(const std::string& w) : ValidationError(w) {}
};
struct CountOutOfRange : ValidationError {
  explicit CountOutOfRange(const std::string& w) : ValidationError(w) {}
};
struct UnknownReference : ValidationError {
  explicit UnknownReference(const std::string& w) : ValidationError(w) {}
};
struct UnknownTreatment : ValidationError {
  explicit UnknownTreatment(const std::string& w) : ValidationError(w) {}
};
struct DimensionMismatch : ValidationError {
  explicit DimensionMismatch(const std::string& w) : ValidationError(w) {}
};
struct PhiOutOfRange : ValidationError {
  explicit PhiOutOfRange(const std::string& w) : ValidationError(w) {}
};
struct InsufficientStudies : ValidationError {
  explicit InsufficientStudies(const std::string& w) : ValidationError(w) {}
};

struct DisconnectedNetwork : Error {
  explicit DisconnectedNetwork(const std::string& w) : Error("disconnection", w) {}
};
struct DisconnectedAfterExclusion : Error {
  explicit DisconnectedAfterExclusion(const std::string& w)
      : Error("disconnection", w) {}
};

struct ConvergenceError : Error {
  explicit ConvergenceError(const std::string& w) : Error("convergence", w) {}
};
struct SingularInformation : ConvergenceError {
  explicit SingularInformation(const std::string& w) : ConvergenceError(w) {}
};
struct SeparationDetected : ConvergenceError {
  explicit SeparationDetected(const std::string& w) : ConvergenceError(w) {}
};
struct NotConvergedFit : ConvergenceError {
  explicit NotConvergedFit(const std::string& w) : ConvergenceError(w) {}
};
struct BracketFailure : ConvergenceError {
  explicit BracketFailure(const std::string& w) : ConvergenceError(w) {}
};
struct InnerFitFailure : ConvergenceError {
  explicit InnerFitFailure(const std::string& w) : ConvergenceError(w) {}
};
struct DegenerateFit : ConvergenceError {
  explicit DegenerateFit(const std::string& w) : ConvergenceError(w) {}
};

}  // namespace plnma

#endif  // PLNMA_ERRORS_HPP
