#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fleetwarden {

enum class ErrorCode {
  kValidation,
  kMalformed,
  kUnknownType,
  kUnknownVersion,
  kLifecycle,
  kNotFound,
  kAlreadyExists,
  kUnauthorized,
  kTransportUnavailable,
  kStorage,
  kParse,
  kOverlap,
  kSpanMismatch,
  kInvalidArgument,
};

std::string_view to_string(ErrorCode code);
std::optional<ErrorCode> parse_error_code(std::string_view text);

// Single exception type for the project; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fleetwarden
