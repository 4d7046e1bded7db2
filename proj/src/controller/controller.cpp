#include "fleetwarden/controller/controller.hpp"

#include "fleetwarden/core/env.hpp"
#include "fleetwarden/core/error.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>

namespace fleetwarden {

void ControllerConfig::validate() const {
  if (heartbeat_period_seconds < 1) throw Error(ErrorCode::kValidation, "heartbeat_period_seconds must be >= 1");
  if (stale_multiplier < 1 || offline_multiplier <= stale_multiplier) {
    throw Error(ErrorCode::kValidation, "staleness multipliers must satisfy 1 <= stale < offline");
  }
  if (command_expiry_seconds < 1) throw Error(ErrorCode::kValidation, "command_expiry_seconds must be >= 1");
  if (summary_period_seconds < 1) throw Error(ErrorCode::kValidation, "summary_period_seconds must be >= 1");
  if (tick_period_seconds < 1) throw Error(ErrorCode::kValidation, "tick_period_seconds must be >= 1");
  if (listen_port < 0 || listen_port > 65535) throw Error(ErrorCode::kValidation, "listen_port out of range");
  for (const auto& [name, model] : power_models) model.validate();
  policy.validate();
}

std::vector<std::string> read_watchlist(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot read watchlist " + path);
  std::vector<std::string> patterns;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    patterns.push_back(line.substr(first, last - first + 1));
  }
  return patterns;
}

ControllerConfig controller_config_from_json(nlohmann::json doc, const std::string& base_dir) {
  if (!doc.is_object()) throw Error(ErrorCode::kParse, "controller config must be an object");
  const nlohmann::json defaults = {{"heartbeat_period_seconds", 30},
                                   {"stale_multiplier", 3},
                                   {"offline_multiplier", 10},
                                   {"command_expiry_seconds", kDefaultCommandExpirySeconds},
                                   {"summary_period_seconds", 300},
                                   {"tick_period_seconds", 5},
                                   {"ledger_mode", "file"},
                                   {"ledger_root", ""},
                                   {"data_dir", ""},
                                   {"listen_address", "127.0.0.1"},
                                   {"listen_port", 8420},
                                   {"auth_token", ""},
                                   {"static_dir", ""},
                                   {"watchlist_path", ""},
                                   {"policy_path", ""}};
  for (const auto& [k, v] : defaults.items()) {
    if (!doc.contains(k)) doc[k] = v;
  }
  apply_env_overrides(doc, {"heartbeat_period_seconds", "stale_multiplier", "offline_multiplier",
                            "command_expiry_seconds", "summary_period_seconds", "tick_period_seconds", "ledger_mode",
                            "ledger_root", "data_dir", "listen_address", "listen_port", "auth_token", "static_dir",
                            "watchlist_path", "policy_path"});
  const auto resolve = [&](const std::string& p) {
    if (p.empty() || std::filesystem::path(p).is_absolute()) return p;
    return (std::filesystem::path(base_dir) / p).string();
  };
  ControllerConfig config;
  try {
    config.heartbeat_period_seconds = doc.at("heartbeat_period_seconds").get<std::int64_t>();
    config.stale_multiplier = doc.at("stale_multiplier").get<std::int64_t>();
    config.offline_multiplier = doc.at("offline_multiplier").get<std::int64_t>();
    config.command_expiry_seconds = doc.at("command_expiry_seconds").get<std::int64_t>();
    config.summary_period_seconds = doc.at("summary_period_seconds").get<std::int64_t>();
    config.tick_period_seconds = doc.at("tick_period_seconds").get<std::int64_t>();
    const auto mode = doc.at("ledger_mode").get<std::string>();
    if (mode != "file" && mode != "http") throw Error(ErrorCode::kValidation, "ledger_mode must be 'file' or 'http'");
    config.ledger_mode = mode == "file" ? LedgerMode::kFile : LedgerMode::kHttp;
    config.ledger_root = resolve(doc.at("ledger_root").get<std::string>());
    config.data_dir = resolve(doc.at("data_dir").get<std::string>());
    config.listen_address = doc.at("listen_address").get<std::string>();
    config.listen_port = doc.at("listen_port").get<int>();
    config.auth_token = doc.at("auth_token").get<std::string>();
    config.static_dir = resolve(doc.at("static_dir").get<std::string>());
    if (doc.contains("watchlist")) config.watchlist = doc.at("watchlist").get<std::vector<std::string>>();
    if (const auto path = doc.at("watchlist_path").get<std::string>(); !path.empty()) {
      for (auto& p : read_watchlist(resolve(path))) config.watchlist.push_back(std::move(p));
    }
    if (const auto path = doc.at("policy_path").get<std::string>(); !path.empty()) {
      config.policy = load_policy_config(resolve(path));
    } else if (doc.contains("policy")) {
      config.policy = policy_config_from_json(doc.at("policy"));
    }
    if (doc.contains("power_models")) {
      for (const auto& [name, m] : doc.at("power_models").items()) {
        config.power_models[name] =
            PowerModel::from_watts(m.at("active_watts").get<double>(), m.at("idle_watts").get<double>(),
                                   m.at("sleep_watts").get<double>(), m.at("off_watts").get<double>());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("controller config: ") + e.what());
  }
  config.validate();
  return config;
}

ControllerConfig load_controller_config(const std::string& path) {
  return controller_config_from_json(read_json_file(path), std::filesystem::path(path).parent_path().string());
}

Controller::Controller(ControllerConfig config, const Clock& clock, LineLedger& ledger, EventStore& events,
                       Prober& prober, IdGenerator& ids)
    : config_(std::move(config)),
      clock_(clock),
      ledger_(ledger),
      events_(events),
      prober_(prober),
      ids_(ids),
      watchlist_(config_.watchlist),
      timeline_(config_.windows().stale_seconds),
      occupancy_(config_.summary_period_seconds) {
  config_.validate();
  const auto history = events_.events();
  Snapshot snapshot;
  for (const auto& e : history) {
    snapshot = apply(std::move(snapshot), e);
    if (e.kind == EventKind::kCommandIssued || e.kind == EventKind::kCommandTransitioned) {
      const auto c = command_from_event(e);
      persisted_.insert({c.command_id, c.state});
    }
  }
  registry_.restore(std::move(snapshot.registry));

  // Ledger history from before this start: persist transitions that happened
  // while the controller was down, but do not feed it to the live timeline.
  const auto now = clock_.now();
  const auto batch = ledger_.read(cursor_);
  for (const auto& r : batch.records) ingest(r, now, false, nullptr);
}

std::mutex& Controller::agent_mutex(const AgentId& agent) {
  std::lock_guard lock(agents_mutex_);
  auto& slot = agent_mutexes_[agent];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

MachineRecord Controller::register_machine(const AgentId& agent, const std::string& address,
                                           DisplayClass display_class, std::optional<std::string> power_model) {
  const auto model = power_model.value_or(default_power_model(display_class));
  if (!config_.power_models.contains(model)) throw Error(ErrorCode::kValidation, "unknown power model '" + model + "'");
  if (!is_valid_address(address)) throw Error(ErrorCode::kValidation, "invariant violation: address '" + address + "'");
  std::lock_guard lock(admin_mutex_);
  if (registry_.find(agent)) throw Error(ErrorCode::kAlreadyExists, "already registered: " + agent.str());
  const auto now = clock_.now();
  MachineRecord record{.agent = agent,
                       .address = address,
                       .display_class = display_class,
                       .power_model = model,
                       .quarantined = false,
                       .last_seen = std::nullopt,
                       .registered_at = now};
  events_.append(registered_event(record));
  return registry_.register_machine(agent, address, display_class, now, model);
}

MachineRecord Controller::quarantine(const AgentId& agent, bool on) {
  std::lock_guard lock(admin_mutex_);
  if (!registry_.find(agent)) throw Error(ErrorCode::kNotFound, "unknown agent: " + agent.str());
  events_.append(quarantine_event(agent, on, clock_.now()));
  return registry_.set_quarantine(agent, on);
}

CommandEntry Controller::issue_locked(const AgentId& agent, CommandKind kind, Timestamp now) {
  CommandEntry command{.command_id = ids_.next(),
                       .target = agent,
                       .kind = kind,
                       .issued_at = now,
                       .expires_at = now + config_.command_expiry_seconds,
                       .state = CommandState::kPending,
                       .result_note = std::nullopt};
  ledger_.append(command, Principal::controller());
  std::lock_guard lock(persisted_mutex_);
  if (persisted_.insert({command.command_id, CommandState::kPending}).second) {
    events_.append(command_issued_event(command, now));
  }
  return command;
}

CommandEntry Controller::issue_action(const AgentId& agent, CommandKind kind) {
  if (!registry_.find(agent)) throw Error(ErrorCode::kNotFound, "unknown agent: " + agent.str());
  std::lock_guard lock(agent_mutex(agent));
  return issue_locked(agent, kind, clock_.now());
}

std::vector<std::string> Controller::scan(const std::string& range) {
  const auto parsed = AddressRange::parse(range);
  auto found = scan_network(parsed, prober_);
  events_.append(scan_event(range, found, clock_.now()));
  return found;
}

FleetView Controller::view() const {
  return fleet_view(registry_.list(), ledger_.read_latest_per_agent(), watchlist_, clock_.now(), config_.windows());
}

MachineDetail Controller::detail(const AgentId& agent) const {
  const auto v = view();
  const auto* row = v.find(agent);
  if (row == nullptr) throw Error(ErrorCode::kNotFound, "unknown agent: " + agent.str());
  MachineDetail d{.row = *row, .commands = {}};
  for (auto& c : ledger_.commands()) {
    if (c.target == agent) d.commands.push_back(std::move(c));
  }
  return d;
}

CommandEntry Controller::command(std::string_view command_id) const {
  auto c = ledger_.find_command(command_id);
  if (!c) throw Error(ErrorCode::kNotFound, "unknown command: " + std::string(command_id));
  return *c;
}

void Controller::ingest(const Record& record, Timestamp now, bool live, TickReport* report) {
  if (const auto* status = std::get_if<StatusEntry>(&record)) {
    if (!registry_.find(status->agent)) return;
    registry_.touch(status->agent, std::min(status->timestamp, now));
    if (live) timeline_.heartbeat(*status, now);
    return;
  }
  const auto& command = std::get<CommandEntry>(record);
  {
    std::lock_guard lock(persisted_mutex_);
    if (persisted_.insert({command.command_id, command.state}).second) {
      events_.append(command.state == CommandState::kPending ? command_issued_event(command, now)
                                                              : command_transitioned_event(command, now));
    }
  }
  if (live && command.state == CommandState::kExecuted && registry_.find(command.target)) {
    timeline_.command_executed(command, now);
  }
  if (report != nullptr && command.state == CommandState::kExpired) report->expired.push_back(command);
}

TickReport Controller::tick() {
  std::lock_guard lock(tick_mutex_);
  const auto now = clock_.now();
  TickReport report;
  report.at = now;
  ledger_.expire_overdue(now);
  const auto batch = ledger_.read(cursor_);
  report.records = batch.records.size();
  report.skipped = batch.skipped;
  for (const auto& r : batch.records) ingest(r, now, true, &report);

  for (const auto& interval : timeline_.advance_to(now)) occupancy_.add(interval);
  for (auto& occupancy : occupancy_.flush(now)) {
    events_.append(summary_event(occupancy, now));
    report.summaries.push_back(std::move(occupancy));
  }

  const auto current = view();
  for (const auto& row : current.rows) {
    auto& flagged = flagged_[row.machine.agent];
    if (row.suspicious != flagged) {
      if (!row.suspicious.empty()) events_.append(suspicious_event(row.machine.agent, row.suspicious, now));
      flagged = row.suspicious;
    }
  }

  const auto decisions = evaluate(current, config_.policy, ledger_.commands(), now);
  for (const auto& decision : decisions) {
    std::lock_guard agent_lock(agent_mutex(decision.agent));
    // An admin may have acted on this machine since the view was taken.
    const auto machine = registry_.find(decision.agent);
    if (!machine || machine->quarantined) continue;
    bool open = false;
    for (const auto& c : ledger_.commands()) {
      if (c.target == decision.agent && c.state == CommandState::kPending) open = true;
    }
    if (open) continue;
    report.issued.push_back(issue_locked(decision.agent, decision.kind, now));
  }
  return report;
}

std::vector<FleetEvent> Controller::history(const HistoryFilter& filter) const {
  return query_history(events_, filter);
}

EnergyReport Controller::energy_report(Timestamp since, Timestamp until) const {
  if (since > until) throw Error(ErrorCode::kInvalidArgument, "inverted range");
  EnergyReport report{.since = since, .until = until};
  std::map<AgentId, EnergyRow> rows;
  for (const auto& e : query_history(events_, {.kind = EventKind::kHeartbeatSummary})) {
    const auto occ = occupancy_from_event(e);
    if (occ.start < since || occ.end > until) continue;
    const auto machine = registry_.find(occ.agent);
    if (!machine) continue;
    const auto model = config_.power_models.find(machine->power_model);
    if (model == config_.power_models.end()) continue;
    auto& row = rows.try_emplace(occ.agent, EnergyRow{occ.agent, machine->power_model, 0, 0}).first->second;
    row.actual += energy_of(occ, model->second);
    row.baseline += model->second.active_mw * (occ.end - occ.start);
  }
  for (auto& [_, row] : rows) {
    report.actual += row.actual;
    report.baseline += row.baseline;
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace fleetwarden
