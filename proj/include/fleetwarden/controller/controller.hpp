#pragma once

#include "fleetwarden/controller/fleet_view.hpp"
#include "fleetwarden/controller/registry.hpp"
#include "fleetwarden/controller/scan.hpp"
#include "fleetwarden/core/clock.hpp"
#include "fleetwarden/core/id_generator.hpp"
#include "fleetwarden/energy/energy.hpp"
#include "fleetwarden/ledger/ledger.hpp"
#include "fleetwarden/persistence/event_store.hpp"
#include "fleetwarden/policy/policy.hpp"

#include <nlohmann/json_fwd.hpp>

#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <vector>

namespace fleetwarden {

struct ControllerConfig {
  std::int64_t heartbeat_period_seconds = 30;
  std::int64_t stale_multiplier = 3;
  std::int64_t offline_multiplier = 10;
  std::int64_t command_expiry_seconds = kDefaultCommandExpirySeconds;
  std::int64_t summary_period_seconds = 300;
  std::int64_t tick_period_seconds = 5;
  std::vector<std::string> watchlist;
  PolicyConfig policy;
  ModelTable power_models = default_models();
  LedgerMode ledger_mode = LedgerMode::kFile;
  std::string ledger_root;
  std::string data_dir;
  std::string listen_address = "127.0.0.1";
  int listen_port = 8420;
  std::string auth_token;
  std::string static_dir;

  LivenessWindows windows() const {
    return LivenessWindows::from_heartbeat(heartbeat_period_seconds, stale_multiplier, offline_multiplier);
  }
  void validate() const;  // throws Error(kValidation)
};

/// JSON config. `watchlist_path` (one pattern per line, '#' comments) and
/// `policy_path` are resolved relative to the config file; inline
/// `watchlist` / `policy` keys are also accepted. FLEETWARDEN_<KEY> overrides
/// scalar keys.
ControllerConfig controller_config_from_json(nlohmann::json doc, const std::string& base_dir = ".");
ControllerConfig load_controller_config(const std::string& path);
std::vector<std::string> read_watchlist(const std::string& path);

struct MachineDetail {
  FleetRow row;
  std::vector<CommandEntry> commands;  // addressed to the machine, by issued_at
};

struct TickReport {
  Timestamp at = 0;
  std::size_t records = 0;  // ledger records ingested
  std::size_t skipped = 0;
  std::vector<CommandEntry> expired;
  std::vector<CommandEntry> issued;  // by policy
  std::vector<Occupancy> summaries;
};

struct EnergyRow {
  AgentId agent;
  std::string power_model;
  MilliwattSeconds actual = 0;
  MilliwattSeconds baseline = 0;  // as if always ACTIVE
};

struct EnergyReport {
  Timestamp since = 0;
  Timestamp until = 0;
  std::vector<EnergyRow> rows;
  MilliwattSeconds actual = 0;
  MilliwattSeconds baseline = 0;
  MilliwattSeconds saved() const { return baseline - actual; }
};

/// The server side: registry, fleet view, admin actions and the background
/// tick (ledger ingestion, expiry, summaries, watchlist flags, policy).
/// Public methods are safe to call concurrently; issuing for one agent is
/// serialized against policy evaluation for that agent.
class Controller {
 public:
  /// Restores the registry from `events` and consumes the ledger history
  /// present at startup.
  Controller(ControllerConfig config, const Clock& clock, LineLedger& ledger, EventStore& events, Prober& prober,
             IdGenerator& ids);

  MachineRecord register_machine(const AgentId& agent, const std::string& address, DisplayClass display_class,
                                 std::optional<std::string> power_model = std::nullopt);
  MachineRecord quarantine(const AgentId& agent, bool on);
  /// Admin action; allowed while quarantined. Throws kNotFound for an
  /// unregistered agent (nothing is appended).
  CommandEntry issue_action(const AgentId& agent, CommandKind kind);
  std::vector<std::string> scan(const std::string& range);

  FleetView view() const;
  MachineDetail detail(const AgentId& agent) const;  // throws kNotFound
  CommandEntry command(std::string_view command_id) const;  // throws kNotFound

  TickReport tick();

  std::vector<FleetEvent> history(const HistoryFilter& filter) const;
  /// From the persisted summaries whose periods lie inside [since, until].
  EnergyReport energy_report(Timestamp since, Timestamp until) const;

  const ControllerConfig& config() const { return config_; }
  const Registry& registry() const { return registry_; }
  LineLedger& ledger() { return ledger_; }
  EventStore& events() { return events_; }
  const Clock& clock() const { return clock_; }

 private:
  void ingest(const Record& record, Timestamp now, bool live, TickReport* report);
  std::mutex& agent_mutex(const AgentId& agent);
  CommandEntry issue_locked(const AgentId& agent, CommandKind kind, Timestamp now);

  ControllerConfig config_;
  const Clock& clock_;
  LineLedger& ledger_;
  EventStore& events_;
  Prober& prober_;
  IdGenerator& ids_;
  Watchlist watchlist_;
  Registry registry_;

  std::mutex admin_mutex_;  // check-append-apply for registry changes
  std::mutex agents_mutex_;
  std::map<AgentId, std::unique_ptr<std::mutex>> agent_mutexes_;

  std::mutex tick_mutex_;
  LedgerCursor cursor_;
  TimelineBuilder timeline_;
  OccupancyAccumulator occupancy_;
  std::set<std::pair<std::string, CommandState>> persisted_;  // command transitions in the event log
  std::mutex persisted_mutex_;
  std::map<AgentId, std::vector<std::string>> flagged_;
};

}  // namespace fleetwarden
