#include "msbp/error.hpp"

namespace msbp {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::NotEventuallyPositive: return "NOT_EVENTUALLY_POSITIVE";
    case ErrorCode::Overflow: return "OVERFLOW";
    case ErrorCode::InvalidScale: return "INVALID_SCALE";
    case ErrorCode::LogDomain: return "LOG_DOMAIN";
    case ErrorCode::ConditionFail: return "CONDITION_FAIL";
    case ErrorCode::SizeLimit: return "SIZE_LIMIT";
    case ErrorCode::InsufficientPoints: return "INSUFFICIENT_POINTS";
    case ErrorCode::Precondition: return "PRECONDITION";
    case ErrorCode::Domain: return "DOMAIN";
  }
  return "UNKNOWN";
}

}  // namespace msbp
