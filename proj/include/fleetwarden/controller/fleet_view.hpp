#pragma once

#include "fleetwarden/core/clock.hpp"
#include "fleetwarden/ledger/types.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fleetwarden {

enum class DisplayClass { kCrt, kLcd, kOther };

std::string_view to_string(DisplayClass c);
std::optional<DisplayClass> parse_display_class(std::string_view text);  // case-insensitive
/// Power-model key used when a machine registers without an explicit one.
std::string default_power_model(DisplayClass c);

/// True for dotted IPv4 or textual IPv6 addresses.
bool is_valid_address(std::string_view address);

struct MachineRecord {
  AgentId agent;
  std::string address;
  DisplayClass display_class = DisplayClass::kOther;
  std::string power_model;  // key into the energy model table
  bool quarantined = false;
  std::optional<Timestamp> last_seen;
  Timestamp registered_at = 0;

  friend bool operator==(const MachineRecord&, const MachineRecord&) = default;
};

enum class Liveness { kActive, kStale, kOffline };

std::string_view to_string(Liveness l);

/// ACTIVE while the newest heartbeat is younger than `stale_seconds`,
/// OFFLINE once it is `offline_seconds` old (or absent), STALE in between.
struct LivenessWindows {
  std::int64_t stale_seconds = 90;
  std::int64_t offline_seconds = 300;

  static LivenessWindows from_heartbeat(std::int64_t heartbeat_period, std::int64_t stale_multiplier = 3,
                                        std::int64_t offline_multiplier = 10) {
    return {heartbeat_period * stale_multiplier, heartbeat_period * offline_multiplier};
  }
};

Liveness liveness_of(const std::optional<StatusEntry>& latest, Timestamp now, const LivenessWindows& windows);

/// Case-insensitive process-name globs (`*`, `?`).
class Watchlist {
 public:
  Watchlist() = default;
  explicit Watchlist(std::vector<std::string> patterns);  // drops empty and duplicate patterns

  bool matches(std::string_view process_name) const;
  const std::vector<std::string>& patterns() const { return patterns_; }
  bool empty() const { return patterns_.empty(); }

 private:
  std::vector<std::string> patterns_;  // lower-cased
};

bool glob_match(std::string_view pattern, std::string_view text);  // case-insensitive

/// Names (deduplicated, sorted) of processes matching the watchlist.
std::vector<std::string> detect_suspicious(const std::vector<ProcessInfo>& processes, const Watchlist& watchlist);

struct FleetRow {
  MachineRecord machine;
  std::optional<StatusEntry> latest;
  Liveness liveness = Liveness::kOffline;
  std::vector<std::string> suspicious;
};

struct FleetView {
  Timestamp at = 0;
  std::vector<FleetRow> rows;  // one per registered machine, ordered by agent id

  const FleetRow* find(const AgentId& agent) const;
};

/// Pure join of the registry with the latest heartbeats.
FleetView fleet_view(const std::vector<MachineRecord>& registry, const std::map<AgentId, StatusEntry>& latest,
                     const Watchlist& watchlist, Timestamp now, const LivenessWindows& windows);

enum class AckStatus { kAcknowledged, kAwaiting };

std::string_view to_string(AckStatus s);

/// Acknowledgement by absence: after an executed SHUTDOWN/HIBERNATE the
/// machine has left the ACTIVE set; after a RESTART it reports from a newer
/// boot. LOGOFF is acknowledged by execution alone.
AckStatus confirm_acknowledgement(const FleetView& before, const FleetView& after, const AgentId& agent,
                                  const CommandEntry& command);

}  // namespace fleetwarden
