#pragma once

#include "fleetwarden/core/clock.hpp"

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace fleetwarden {

/// Stable machine identity, derived from configuration rather than the
/// network address. Non-empty, at most 128 bytes, no path separators or
/// control characters (it names the agent's status file).
class AgentId {
 public:
  static constexpr std::size_t kMaxLength = 128;

  static AgentId parse(std::string_view value);  // throws Error(kValidation)
  static std::optional<AgentId> try_parse(std::string_view value) noexcept;
  static bool is_valid(std::string_view value) noexcept;

  const std::string& str() const noexcept { return value_; }

  friend auto operator<=>(const AgentId&, const AgentId&) = default;
  friend bool operator==(const AgentId&, const AgentId&) = default;

 private:
  explicit AgentId(std::string value) : value_(std::move(value)) {}
  std::string value_;
};

enum class Status { kBusy, kIdle };

struct ProcessInfo {
  std::string name;
  std::int64_t pid = 0;
  std::int64_t memory_kb = 0;

  friend bool operator==(const ProcessInfo&, const ProcessInfo&) = default;
};

/// Cumulative interface counters since agent start.
struct TrafficCounters {
  std::uint64_t rx_bytes = 0;
  std::uint64_t tx_bytes = 0;
  std::uint64_t rx_packets = 0;
  std::uint64_t tx_packets = 0;

  friend bool operator==(const TrafficCounters&, const TrafficCounters&) = default;
};

/// Ordering key for an agent's heartbeats. `boot` is the agent start time;
/// seq restarts at 0 with every boot.
struct HeartbeatKey {
  Timestamp boot = 0;
  std::uint64_t seq = 0;

  friend auto operator<=>(const HeartbeatKey&, const HeartbeatKey&) = default;
};

struct StatusEntry {
  AgentId agent;
  Timestamp boot = 0;
  std::uint64_t seq = 0;
  Timestamp timestamp = 0;
  Status status = Status::kBusy;
  std::int64_t idle_seconds = 0;
  std::vector<ProcessInfo> processes;
  TrafficCounters traffic;
  bool degraded = false;       // some source was unavailable for this sample
  bool traffic_reset = false;  // counters went backwards since the last sample

  HeartbeatKey key() const { return {boot, seq}; }

  friend bool operator==(const StatusEntry&, const StatusEntry&) = default;
};

enum class CommandKind { kShutdown, kRestart, kLogoff, kHibernate };

enum class CommandState { kPending, kExecuted, kFailed, kExpired };

inline bool is_terminal(CommandState s) { return s != CommandState::kPending; }

struct CommandEntry {
  std::string command_id;
  AgentId target;
  CommandKind kind = CommandKind::kShutdown;
  Timestamp issued_at = 0;
  Timestamp expires_at = 0;
  CommandState state = CommandState::kPending;
  std::optional<std::string> result_note;

  friend bool operator==(const CommandEntry&, const CommandEntry&) = default;
};

using Record = std::variant<StatusEntry, CommandEntry>;

inline constexpr Timestamp kDefaultCommandExpirySeconds = 300;

std::string_view to_string(Status s);
std::string_view to_string(CommandKind k);
std::string_view to_string(CommandState s);
std::optional<Status> parse_status(std::string_view text);
std::optional<CommandKind> parse_command_kind(std::string_view text);  // case-insensitive
std::optional<CommandState> parse_command_state(std::string_view text);

/// Throw Error(kValidation) naming the first offending field.
void validate(const StatusEntry& entry);
void validate(const CommandEntry& entry);
void validate(const Record& record);

}  // namespace fleetwarden

template <>
struct std::hash<fleetwarden::AgentId> {
  std::size_t operator()(const fleetwarden::AgentId& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};
