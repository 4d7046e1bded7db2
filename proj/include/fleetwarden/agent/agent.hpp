#pragma once

#include "fleetwarden/agent/activity.hpp"
#include "fleetwarden/agent/dedupe_journal.hpp"
#include "fleetwarden/agent/platform.hpp"
#include "fleetwarden/agent/sources.hpp"
#include "fleetwarden/core/clock.hpp"
#include "fleetwarden/ledger/ledger.hpp"

#include <nlohmann/json_fwd.hpp>

#include <atomic>
#include <deque>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

namespace fleetwarden {

struct AgentConfig {
  AgentId agent_id;
  std::int64_t idle_threshold_seconds = 600;
  std::int64_t heartbeat_period_seconds = 30;
  std::int64_t command_poll_period_seconds = 5;
  /// A command is not started with less than this left before it expires
  /// (capped at half its lifetime), so a crashed agent can still report it.
  std::int64_t execution_margin_seconds = 30;
  LedgerMode ledger_mode = LedgerMode::kFile;
  std::string ledger_root;  // file mode
  std::string endpoint;     // http mode, e.g. http://10.0.0.1:8420
  std::string auth_token;
  std::string state_dir;

  void validate() const;  // throws Error(kValidation)
};

/// Reads a JSON config document; FLEETWARDEN_<KEY> environment variables
/// override individual keys.
AgentConfig agent_config_from_json(nlohmann::json doc);
AgentConfig load_agent_config(const std::string& path);

/// Points in poll_and_execute where a fault hook may interrupt the agent.
enum class ExecutionStage {
  kBeforeJournal,  // command read, nothing recorded yet
  kAfterJournal,   // intent durable, platform not yet invoked
  kAfterInvoke,    // platform invoked, outcome not yet journaled
  kAfterOutcome,   // outcome journaled, ledger not yet updated
};

/// The per-machine daemon: periodic heartbeats plus command execution.
/// heartbeat_tick and poll_and_execute may run on different threads.
class Agent {
 public:
  static constexpr std::size_t kMaxBufferedEntries = 100;

  using FaultHook = std::function<void(ExecutionStage, const CommandEntry&)>;

  /// `boot` is this agent run's start time; heartbeat seq restarts at 0.
  Agent(AgentConfig config, const Clock& clock, AgentSources sources, Ledger& ledger, PlatformAction& platform,
        DedupeJournal& journal, Timestamp boot);

  /// Samples, appends (buffering while the ledger is unreachable) and
  /// returns the new entry.
  StatusEntry heartbeat_tick();

  /// Executes every pending command addressed to this agent at most once.
  /// Returns the ids settled as EXECUTED.
  std::vector<std::string> poll_and_execute();

  /// True once a shutdown/restart/hibernate succeeded; the loops stop.
  bool halted() const { return halted_.load(); }
  std::size_t buffered() const;
  std::uint64_t next_seq() const;
  Timestamp boot() const { return boot_; }
  const AgentConfig& config() const { return config_; }

  void set_fault_hook(FaultHook hook) { fault_hook_ = std::move(hook); }

 private:
  void flush_locked();
  bool settle(const CommandEntry& command, const ActionOutcome& outcome);
  void fault(ExecutionStage stage, const CommandEntry& command) const {
    if (fault_hook_) fault_hook_(stage, command);
  }

  AgentConfig config_;
  const Clock& clock_;
  AgentSources sources_;
  Ledger& ledger_;
  PlatformAction& platform_;
  DedupeJournal& journal_;
  Timestamp boot_;

  mutable std::mutex heartbeat_mutex_;
  std::uint64_t seq_ = 0;
  std::deque<StatusEntry> outbox_;
  TrafficSampler traffic_;

  std::mutex poll_mutex_;
  std::atomic<bool> halted_{false};
  FaultHook fault_hook_;
};

}  // namespace fleetwarden
