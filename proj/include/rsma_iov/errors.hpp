#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rsma_iov {

enum class ErrorKind {
  kInvalidConfig,
  kDegenerateGeometry,
  kInvalidCoefficient,
  kIndex,
  kDimensionMismatch,
  kSingularSteering,
  kInvalidLinearization,
  kQosInfeasible,
  kPayloadInfeasible,
  kInvalidWeather,
  kStepSize,
  kUndefinedBaseline,
  kConsistency,
  kCollision,
  kComparison,
  kSolver,
  kIo,
};

std::string_view to_string(ErrorKind kind);

// Every module reports failures through this type; `kind` is machine-readable
// and ends up in the CLI error JSON.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace rsma_iov
