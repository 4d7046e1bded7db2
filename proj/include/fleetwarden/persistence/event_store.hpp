#pragma once

#include "fleetwarden/controller/fleet_view.hpp"
#include "fleetwarden/core/clock.hpp"
#include "fleetwarden/energy/energy.hpp"
#include "fleetwarden/ledger/types.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace fleetwarden {

enum class EventKind {
  kRegistered,
  kHeartbeatSummary,
  kCommandIssued,
  kCommandTransitioned,
  kQuarantineChanged,
  kSuspiciousFlagged,
  kScanCompleted,
};

std::string_view to_string(EventKind k);
std::optional<EventKind> parse_event_kind(std::string_view text);

using EventId = std::uint64_t;

struct FleetEvent {
  EventId event_id = 0;
  Timestamp at = 0;
  EventKind kind = EventKind::kRegistered;
  std::optional<AgentId> agent;
  nlohmann::json payload = nlohmann::json::object();

  friend bool operator==(const FleetEvent&, const FleetEvent&) = default;
};

/// Typed constructors; event_id is assigned by the store.
FleetEvent registered_event(const MachineRecord& record);
FleetEvent command_issued_event(const CommandEntry& command, Timestamp at);
FleetEvent command_transitioned_event(const CommandEntry& command, Timestamp at);
FleetEvent quarantine_event(const AgentId& agent, bool on, Timestamp at);
FleetEvent summary_event(const Occupancy& occupancy, Timestamp at);
FleetEvent suspicious_event(const AgentId& agent, const std::vector<std::string>& names, Timestamp at);
FleetEvent scan_event(const std::string& range, const std::vector<std::string>& found, Timestamp at);

MachineRecord machine_from_event(const FleetEvent& event);  // REGISTERED
CommandEntry command_from_event(const FleetEvent& event);   // COMMAND_ISSUED
Occupancy occupancy_from_event(const FleetEvent& event);    // HEARTBEAT_SUMMARY

/// One line, same discipline as the ledger records.
std::string encode_event(const FleetEvent& event);
FleetEvent decode_event(std::string_view line);  // throws Error(kMalformed)

/// Controller state recoverable from history.
struct Snapshot {
  std::map<AgentId, MachineRecord> registry;
  std::map<std::string, CommandEntry> open_commands;  // PENDING, by command_id

  std::vector<AgentId> quarantined() const;
  friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

/// The per-event transition function. Events that do not affect the
/// snapshot (summaries, scans, flags) leave it unchanged.
Snapshot apply(Snapshot snapshot, const FleetEvent& event);

struct HistoryFilter {
  std::optional<AgentId> agent;
  std::optional<EventKind> kind;
  std::optional<Timestamp> since;  // inclusive
  std::optional<Timestamp> until;  // inclusive
};

bool matches(const HistoryFilter& filter, const FleetEvent& event);

class EventStore {
 public:
  virtual ~EventStore() = default;

  /// Assigns the next event_id and appends durably; returns the id.
  virtual EventId append(FleetEvent event) = 0;
  /// A consistent prefix of the log, in event_id order.
  virtual std::vector<FleetEvent> events() const = 0;
  virtual EventId last_id() const = 0;
  /// Torn tail records dropped when the store was opened.
  virtual std::size_t skipped() const { return 0; }
};

class MemoryEventStore final : public EventStore {
 public:
  EventId append(FleetEvent event) override;
  std::vector<FleetEvent> events() const override;
  EventId last_id() const override;

 private:
  mutable std::shared_mutex mutex_;
  std::vector<FleetEvent> events_;
};

/// `<data-dir>/events.log`. On open, a torn final line is dropped (and
/// truncated away); any other undecodable line fails the open.
class FileEventStore final : public EventStore {
 public:
  explicit FileEventStore(const std::filesystem::path& data_dir);
  ~FileEventStore() override;
  FileEventStore(const FileEventStore&) = delete;
  FileEventStore& operator=(const FileEventStore&) = delete;

  EventId append(FleetEvent event) override;
  std::vector<FleetEvent> events() const override;
  EventId last_id() const override;
  std::size_t skipped() const override { return skipped_; }

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  int fd_ = -1;
  std::size_t skipped_ = 0;
  mutable std::shared_mutex mutex_;
  std::vector<FleetEvent> events_;
};

/// Left fold of apply() over events with id <= upto.
Snapshot replay(const EventStore& store, std::optional<EventId> upto = std::nullopt);

/// Matching events in id order. Throws Error(kInvalidArgument) if since > until.
std::vector<FleetEvent> query_history(const EventStore& store, const HistoryFilter& filter);

}  // namespace fleetwarden
