#include "lisaliency/error.hpp"

namespace lisaliency {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kShapeMismatch: return "shape_mismatch";
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kNumeric: return "numeric";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kState: return "state";
    case ErrorCode::kDivergence: return "divergence";
  }
  return "unknown";
}

}  // namespace lisaliency
