#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace iccs {

/// The closed set of failure codes every client-visible error carries.
enum class ErrorCode {
  kConnectFailed,
  kCommFailure,
  kTimeout,
  kNoSuchObject,
  kNoSuchMethod,
  kBadArgs,
  kReserved,
  kOutOfRange,
  kAppError,
};

/// Wire spelling, e.g. "CONNECT_FAILED".
std::string_view to_string(ErrorCode code);
std::optional<ErrorCode> error_code_from_string(std::string_view text);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace iccs
