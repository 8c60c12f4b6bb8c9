#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace msbp {

enum class ErrorCode {
  InvalidArgument,
  NotEventuallyPositive,
  Overflow,
  InvalidScale,
  LogDomain,
  ConditionFail,
  SizeLimit,
  InsufficientPoints,
  Precondition,
  Domain,
};

std::string_view to_string(ErrorCode code) noexcept;

// All recoverable failures in the library are reported through this type;
// the code lets callers (the CLI in particular) map them to exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool ok, const std::string& what,
                    ErrorCode code = ErrorCode::InvalidArgument) {
  if (!ok) throw Error(code, what);
}

}  // namespace msbp
