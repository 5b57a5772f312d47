#include "rsma_iov/errors.hpp"

namespace rsma_iov {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidConfig: return "invalid-config";
    case ErrorKind::kDegenerateGeometry: return "degenerate-geometry";
    case ErrorKind::kInvalidCoefficient: return "invalid-coefficient";
    case ErrorKind::kIndex: return "index";
    case ErrorKind::kDimensionMismatch: return "dimension-mismatch";
    case ErrorKind::kSingularSteering: return "singular-steering";
    case ErrorKind::kInvalidLinearization: return "invalid-linearization";
    case ErrorKind::kQosInfeasible: return "qos-infeasible";
    case ErrorKind::kPayloadInfeasible: return "payload-infeasible";
    case ErrorKind::kInvalidWeather: return "invalid-weather";
    case ErrorKind::kStepSize: return "step-size";
    case ErrorKind::kUndefinedBaseline: return "undefined-baseline";
    case ErrorKind::kConsistency: return "consistency";
    case ErrorKind::kCollision: return "collision";
    case ErrorKind::kComparison: return "comparison";
    case ErrorKind::kSolver: return "solver";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

}  // namespace rsma_iov
