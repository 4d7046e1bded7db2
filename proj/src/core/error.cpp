#include "fleetwarden/core/error.hpp"

namespace fleetwarden {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kMalformed: return "malformed";
    case ErrorCode::kUnknownType: return "unknown_type";
    case ErrorCode::kUnknownVersion: return "unknown_version";
    case ErrorCode::kLifecycle: return "lifecycle";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kAlreadyExists: return "already_exists";
    case ErrorCode::kUnauthorized: return "unauthorized";
    case ErrorCode::kTransportUnavailable: return "transport_unavailable";
    case ErrorCode::kStorage: return "storage";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kOverlap: return "overlap";
    case ErrorCode::kSpanMismatch: return "span_mismatch";
    case ErrorCode::kInvalidArgument: return "invalid_argument";
  }
  return "unknown";
}

std::optional<ErrorCode> parse_error_code(std::string_view text) {
  for (int i = 0; i <= static_cast<int>(ErrorCode::kInvalidArgument); ++i) {
    const auto code = static_cast<ErrorCode>(i);
    if (to_string(code) == text) return code;
  }
  return std::nullopt;
}

}  // namespace fleetwarden
