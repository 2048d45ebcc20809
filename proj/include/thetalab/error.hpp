#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace thetalab {

enum class ErrorCode {
  kInvalidInput,
  kTauNotSymmetric,
  kTauNotPositiveDefinite,
  kPrecisionUnreachable,
  kDegenerateSample,
  kNotOnDivisor,
  kPole,
  kDegenerateJet,
  kUnsupportedGenus,
  kParseError,
  kIoError,
};

// Machine-readable identifier, e.g. "TAU_NOT_SYMMETRIC".
std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace thetalab
