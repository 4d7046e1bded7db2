#include "fleetwarden/agent/agent.hpp"

#include "fleetwarden/core/env.hpp"
#include "fleetwarden/core/error.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>

namespace fleetwarden {

void AgentConfig::validate() const {
  if (idle_threshold_seconds < 60) {
    throw Error(ErrorCode::kValidation, "invariant violation: idle_threshold_seconds must be >= 60");
  }
  if (heartbeat_period_seconds < 1) {
    throw Error(ErrorCode::kValidation, "invariant violation: heartbeat_period_seconds must be >= 1");
  }
  if (command_poll_period_seconds < 1) {
    throw Error(ErrorCode::kValidation, "invariant violation: command_poll_period_seconds must be >= 1");
  }
  if (execution_margin_seconds < 0) {
    throw Error(ErrorCode::kValidation, "invariant violation: execution_margin_seconds must be >= 0");
  }
  if (ledger_mode == LedgerMode::kFile && ledger_root.empty()) {
    throw Error(ErrorCode::kValidation, "invariant violation: ledger_root is required in file mode");
  }
  if (ledger_mode == LedgerMode::kHttp && endpoint.empty()) {
    throw Error(ErrorCode::kValidation, "invariant violation: endpoint is required in http mode");
  }
}

AgentConfig agent_config_from_json(nlohmann::json doc) {
  if (!doc.is_object()) throw Error(ErrorCode::kParse, "agent config must be an object");
  // Defaults first so overrides know each key's type.
  const nlohmann::json defaults = {{"idle_threshold_seconds", 600},
                                   {"heartbeat_period_seconds", 30},
                                   {"command_poll_period_seconds", 5},
                                   {"execution_margin_seconds", 30},
                                   {"ledger_mode", "file"},
                                   {"ledger_root", ""},
                                   {"endpoint", ""},
                                   {"auth_token", ""},
                                   {"state_dir", ""},
                                   {"agent_id", ""}};
  for (const auto& [k, v] : defaults.items()) {
    if (!doc.contains(k)) doc[k] = v;
  }
  apply_env_overrides(doc, {"agent_id", "idle_threshold_seconds", "heartbeat_period_seconds",
                            "command_poll_period_seconds", "execution_margin_seconds", "ledger_mode", "ledger_root", "endpoint", "auth_token",
                            "state_dir"});
  try {
    AgentConfig config{.agent_id = AgentId::parse(doc.at("agent_id").get<std::string>())};
    config.idle_threshold_seconds = doc.at("idle_threshold_seconds").get<std::int64_t>();
    config.heartbeat_period_seconds = doc.at("heartbeat_period_seconds").get<std::int64_t>();
    config.command_poll_period_seconds = doc.at("command_poll_period_seconds").get<std::int64_t>();
    config.execution_margin_seconds = doc.at("execution_margin_seconds").get<std::int64_t>();
    const auto mode = doc.at("ledger_mode").get<std::string>();
    if (mode == "file") {
      config.ledger_mode = LedgerMode::kFile;
    } else if (mode == "http") {
      config.ledger_mode = LedgerMode::kHttp;
    } else {
      throw Error(ErrorCode::kValidation, "ledger_mode must be 'file' or 'http'");
    }
    config.ledger_root = doc.at("ledger_root").get<std::string>();
    config.endpoint = doc.at("endpoint").get<std::string>();
    config.auth_token = doc.at("auth_token").get<std::string>();
    config.state_dir = doc.at("state_dir").get<std::string>();
    config.validate();
    return config;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("agent config: ") + e.what());
  }
}

AgentConfig load_agent_config(const std::string& path) { return agent_config_from_json(read_json_file(path)); }

// ---------------------------------------------------------------------------

Agent::Agent(AgentConfig config, const Clock& clock, AgentSources sources, Ledger& ledger, PlatformAction& platform,
             DedupeJournal& journal, Timestamp boot)
    : config_(std::move(config)),
      clock_(clock),
      sources_(sources),
      ledger_(ledger),
      platform_(platform),
      journal_(journal),
      boot_(boot) {
  config_.validate();
}

std::size_t Agent::buffered() const {
  std::lock_guard lock(heartbeat_mutex_);
  return outbox_.size();
}

std::uint64_t Agent::next_seq() const {
  std::lock_guard lock(heartbeat_mutex_);
  return seq_;
}

StatusEntry Agent::heartbeat_tick() {
  if (halted()) throw Error(ErrorCode::kInvalidArgument, "agent is halted");
  std::lock_guard lock(heartbeat_mutex_);
  const auto now = clock_.now();
  const auto activity = sample_activity(now, sources_.input);
  auto procs = sample_processes(sources_.processes);
  const auto traffic = traffic_.sample(sources_.traffic);

  StatusEntry entry{.agent = config_.agent_id};
  entry.boot = boot_;
  entry.seq = seq_++;
  entry.timestamp = now;
  entry.idle_seconds = activity.idle_seconds;
  entry.status = determine_status(activity.idle_seconds, config_.idle_threshold_seconds);
  entry.processes = std::move(procs.processes);
  entry.traffic = traffic.counters;
  entry.traffic_reset = traffic.reset;
  entry.degraded = activity.degraded || procs.degraded || traffic.degraded;

  outbox_.push_back(entry);
  while (outbox_.size() > kMaxBufferedEntries) outbox_.pop_front();
  flush_locked();
  return entry;
}

void Agent::flush_locked() {
  while (!outbox_.empty()) {
    try {
      ledger_.append(outbox_.front());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kTransportUnavailable) {
        spdlog::debug("ledger unavailable, {} heartbeats buffered: {}", outbox_.size(), e.what());
        return;
      }
      if (e.code() != ErrorCode::kValidation) throw;
      // Already delivered on an earlier attempt whose reply was lost.
      spdlog::warn("dropping heartbeat seq {}: {}", outbox_.front().seq, e.what());
    }
    outbox_.pop_front();
  }
}

bool Agent::settle(const CommandEntry& command, const ActionOutcome& outcome) {
  const auto state = outcome.ok ? CommandState::kExecuted : CommandState::kFailed;
  try {
    ledger_.transition_command(command.command_id, state, outcome.detail);
    return true;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kLifecycle) {
      spdlog::warn("command {} already settled: {}", command.command_id, e.what());
      return false;
    }
    if (e.code() == ErrorCode::kTransportUnavailable) {
      // The journal holds the outcome; the next poll settles it.
      spdlog::warn("could not settle {}: {}", command.command_id, e.what());
      return false;
    }
    throw;
  }
}

std::vector<std::string> Agent::poll_and_execute() {
  std::lock_guard lock(poll_mutex_);
  std::vector<std::string> executed;
  if (halted()) return executed;

  const auto now = clock_.now();
  journal_.prune(now);
  const auto pending = ledger_.read_pending_commands(config_.agent_id, now);
  for (const auto& command : pending) {
    if (auto seen = journal_.find(command.command_id)) {
      // Interrupted earlier; never invoke twice.
      const auto outcome = seen->outcome.value_or(ActionOutcome{false, "interrupted before the outcome was recorded"});
      if (settle(command, outcome) && outcome.ok) executed.push_back(command.command_id);
      continue;
    }

    const auto margin = std::min(config_.execution_margin_seconds, (command.expires_at - command.issued_at) / 2);
    if (command.expires_at - now < margin) {
      spdlog::warn("not starting {}: it expires in {}s", command.command_id, command.expires_at - now);
      continue;
    }

    fault(ExecutionStage::kBeforeJournal, command);
    try {
      journal_.record_intent(command.command_id, command.expires_at);
    } catch (const Error& e) {
      spdlog::error("not executing {}: dedupe journal write failed: {}", command.command_id, e.what());
      continue;
    }
    fault(ExecutionStage::kAfterJournal, command);

    const auto outcome = invoke(platform_, command.kind, ActionContext{command.command_id});
    fault(ExecutionStage::kAfterInvoke, command);
    try {
      journal_.record_outcome(command.command_id, outcome);
    } catch (const Error& e) {
      spdlog::warn("could not journal outcome of {}: {}", command.command_id, e.what());
    }
    fault(ExecutionStage::kAfterOutcome, command);

    if (settle(command, outcome) && outcome.ok) executed.push_back(command.command_id);
    if (outcome.ok && halts_agent(command.kind)) {
      halted_ = true;
      break;
    }
  }
  return executed;
}

}  // namespace fleetwarden
