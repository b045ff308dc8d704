#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace rrmd {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Typed failures. Construction and evaluation errors are exceptional by
// design: every caller that can recover (grid runner, CLI) catches the
// specific type it knows how to handle.
struct DomainViolation : std::runtime_error {
  explicit DomainViolation(const std::string& what) : std::runtime_error(what) {}
};
struct NumericOverflow : std::runtime_error {
  explicit NumericOverflow(const std::string& what) : std::runtime_error(what) {}
};
struct RootFindFailure : std::runtime_error {
  explicit RootFindFailure(const std::string& what) : std::runtime_error(what) {}
};
struct EmptyRegion : std::runtime_error {
  explicit EmptyRegion(const std::string& what) : std::runtime_error(what) {}
};
struct SingularBlock : std::runtime_error {
  explicit SingularBlock(const std::string& what) : std::runtime_error(what) {}
};
struct ShapeMismatch : std::runtime_error {
  explicit ShapeMismatch(const std::string& what) : std::runtime_error(what) {}
};
struct PartitionMismatch : std::runtime_error {
  explicit PartitionMismatch(const std::string& what) : std::runtime_error(what) {}
};
struct CompatibilityViolation : std::runtime_error {
  explicit CompatibilityViolation(const std::string& what) : std::runtime_error(what) {}
};
struct NonpositiveMu : std::runtime_error {
  explicit NonpositiveMu(const std::string& what) : std::runtime_error(what) {}
};
struct BadT : std::runtime_error {
  explicit BadT(const std::string& what) : std::runtime_error(what) {}
};
struct MissingConstants : std::runtime_error {
  explicit MissingConstants(const std::string& what) : std::runtime_error(what) {}
};
struct DivergenceDetected : std::runtime_error {
  explicit DivergenceDetected(const std::string& what) : std::runtime_error(what) {}
};
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};
struct BudgetExhausted : std::runtime_error {
  explicit BudgetExhausted(const std::string& what) : std::runtime_error(what) {}
};

inline constexpr const char* kVersion = "rrmd 0.1.0";

}  // namespace rrmd
