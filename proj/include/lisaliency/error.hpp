#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lisaliency {

enum class ErrorCode {
  kShapeMismatch,
  kInvalidArgument,
  kNumeric,
  kFormat,
  kIo,
  kNotFound,
  kState,
  kDivergence,
};

std::string_view to_string(ErrorCode code);

// All library failures are reported through this exception. The code is
// stable and machine-readable; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace lisaliency
