#pragma once

#include "fleetwarden/ledger/types.hpp"

#include <string>
#include <string_view>
#include <variant>

namespace fleetwarden {

/// Schema version written into every ledger line.
inline constexpr int kLedgerSchemaVersion = 1;

enum class DecodeErrorKind { kMalformed, kUnknownType, kUnknownVersion, kInvariantViolation };

struct DecodeError {
  DecodeErrorKind kind = DecodeErrorKind::kMalformed;
  std::string message;
};

class Decoded {
 public:
  Decoded(Record r) : value_(std::move(r)) {}       // NOLINT(google-explicit-constructor)
  Decoded(DecodeError e) : value_(std::move(e)) {}  // NOLINT(google-explicit-constructor)

  bool ok() const noexcept { return std::holds_alternative<Record>(value_); }
  const Record& record() const { return std::get<Record>(value_); }
  Record& record() { return std::get<Record>(value_); }
  const DecodeError& error() const { return std::get<DecodeError>(value_); }

 private:
  std::variant<Record, DecodeError> value_;
};

/// Single-line JSON encoding with a "type" tag and schema version "v".
/// Throws Error(kValidation) when the record breaks an invariant.
std::string encode_record(const Record& record);

/// Never throws; any input bytes produce either a record or a DecodeError.
Decoded decode_record(std::string_view line) noexcept;

}  // namespace fleetwarden
