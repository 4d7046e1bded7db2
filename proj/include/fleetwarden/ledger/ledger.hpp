#pragma once

#include "fleetwarden/ledger/codec.hpp"
#include "fleetwarden/ledger/line_store.hpp"
#include "fleetwarden/ledger/types.hpp"

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace fleetwarden {

/// Who is writing. Agents may append their own heartbeats and settle their
/// own commands; only the controller issues commands.
struct Principal {
  enum class Role { kController, kAgent };

  Role role = Role::kController;
  std::optional<AgentId> agent;

  static Principal controller() { return {}; }
  static Principal agent_of(AgentId id) { return {Role::kAgent, std::move(id)}; }
};

struct LedgerPosition {
  std::string stream;
  StreamPosition position;
};

/// Per-reader resumption state; each record is returned at most once.
struct LedgerCursor {
  std::map<std::string, StreamPosition> positions;
};

struct ReadBatch {
  std::vector<Record> records;
  std::size_t skipped = 0;  // malformed, out-of-order or lifecycle-violating lines
};

struct LatestSnapshot {
  std::map<AgentId, StatusEntry> entries;
  std::size_t skipped = 0;
};

/// Shared-directory files or a controller-hosted HTTP ledger.
enum class LedgerMode { kFile, kHttp };

inline constexpr std::string_view kExpiredNote = "expired unexecuted";

/// The shared ledger over a LineStore. Enforces authorization, per-agent
/// heartbeat ordering and the command lifecycle on append; readers fold the
/// append-only history and skip (and count) anything that breaks those rules.
class LineLedger {
 public:
  explicit LineLedger(LineStore& store) : store_(store) {}

  LedgerPosition append(const Record& record, const Principal& who);

  std::map<AgentId, StatusEntry> read_latest_per_agent();
  LatestSnapshot latest_snapshot();

  /// PENDING, unexpired commands for `target` ordered by issued_at. Overdue
  /// ones are transitioned to EXPIRED as a side effect.
  std::vector<CommandEntry> read_pending_commands(const AgentId& target, Timestamp now, const Principal& who);

  CommandEntry transition_command(std::string_view command_id, CommandState new_state,
                                  std::optional<std::string> result_note, const Principal& who);

  /// Expires every overdue PENDING command; returns the EXPIRED entries.
  std::vector<CommandEntry> expire_overdue(Timestamp now);

  std::optional<CommandEntry> find_command(std::string_view command_id);
  std::vector<CommandEntry> commands();  // current state of every command, ordered by issued_at

  ReadBatch read(LedgerCursor& cursor) const;

  std::size_t skipped_command_lines();

  LineStore& store() { return store_; }

 private:
  struct CommandIndex {
    StreamPosition position;
    std::map<std::string, CommandEntry, std::less<>> current;
    std::size_t skipped = 0;
  };
  struct StatusIndex {
    StreamPosition position;
    std::optional<StatusEntry> latest;
    std::size_t skipped = 0;
  };

  void refresh_commands_locked();
  void refresh_status_locked(const std::string& stream);
  void authorize(const Record& record, const Principal& who) const;
  void check_command_locked(const CommandEntry& entry) const;

  LineStore& store_;
  std::mutex mutex_;
  CommandIndex commands_;
  std::map<std::string, StatusIndex> status_;
};

/// A principal-bound view of a ledger: what an agent (or controller) uses
/// regardless of transport.
class Ledger {
 public:
  virtual ~Ledger() = default;

  virtual LedgerPosition append(const Record& record) = 0;
  virtual std::map<AgentId, StatusEntry> read_latest_per_agent() = 0;
  virtual std::vector<CommandEntry> read_pending_commands(const AgentId& target, Timestamp now) = 0;
  virtual CommandEntry transition_command(std::string_view command_id, CommandState new_state,
                                          std::optional<std::string> result_note) = 0;
};

class LocalLedgerClient final : public Ledger {
 public:
  LocalLedgerClient(LineLedger& ledger, Principal who) : ledger_(ledger), who_(std::move(who)) {}

  LedgerPosition append(const Record& record) override { return ledger_.append(record, who_); }
  std::map<AgentId, StatusEntry> read_latest_per_agent() override { return ledger_.read_latest_per_agent(); }
  std::vector<CommandEntry> read_pending_commands(const AgentId& target, Timestamp now) override {
    return ledger_.read_pending_commands(target, now, who_);
  }
  CommandEntry transition_command(std::string_view command_id, CommandState new_state,
                                  std::optional<std::string> result_note) override {
    return ledger_.transition_command(command_id, new_state, std::move(result_note), who_);
  }

 private:
  LineLedger& ledger_;
  Principal who_;
};

/// True when `next` is a legal successor of `current` for the same command.
bool is_valid_transition(const CommandEntry& current, const CommandEntry& next);

}  // namespace fleetwarden
