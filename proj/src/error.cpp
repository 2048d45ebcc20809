#include "thetalab/error.hpp"

namespace thetalab {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "INVALID_INPUT";
    case ErrorCode::kTauNotSymmetric: return "TAU_NOT_SYMMETRIC";
    case ErrorCode::kTauNotPositiveDefinite: return "TAU_NOT_POSITIVE_DEFINITE";
    case ErrorCode::kPrecisionUnreachable: return "PRECISION_UNREACHABLE";
    case ErrorCode::kDegenerateSample: return "DEGENERATE_SAMPLE";
    case ErrorCode::kNotOnDivisor: return "NOT_ON_DIVISOR";
    case ErrorCode::kPole: return "POLE";
    case ErrorCode::kDegenerateJet: return "DEGENERATE_JET";
    case ErrorCode::kUnsupportedGenus: return "UNSUPPORTED_GENUS";
    case ErrorCode::kParseError: return "PARSE_ERROR";
    case ErrorCode::kIoError: return "IO_ERROR";
  }
  return "UNKNOWN";
}

}  // namespace thetalab
