#pragma once

#include "fleetwarden/agent/trace.hpp"
#include "fleetwarden/controller/fleet_view.hpp"
#include "fleetwarden/policy/policy.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fleetwarden {

struct MachineSpec {
  AgentId agent;
  std::string address;
  DisplayClass display_class = DisplayClass::kOther;
  ActivityTrace trace;        // relative to the scenario start
  std::int64_t power_on_at = 0;
  std::int64_t restart_delay_seconds = 30;
  bool registered = true;     // registered before the timeline starts
};

enum class AdminKind { kStartup, kScan, kView, kDetail, kIssue, kAck, kRegister, kQuarantine };

std::string_view to_string(AdminKind k);
std::optional<AdminKind> parse_admin_kind(std::string_view text);

/// One step of the administrator timeline. Which fields matter depends on
/// the kind: `agent` for detail/issue/ack/register/quarantine, `command` for
/// issue, `range` for scan, `on` for quarantine.
struct AdminAction {
  std::int64_t at = 0;
  AdminKind kind = AdminKind::kView;
  std::optional<AgentId> agent;
  std::optional<CommandKind> command;
  std::string range;
  bool on = true;
};

struct Scenario {
  std::string name;
  std::uint64_t seed = 0;
  Timestamp start = 1704067200;  // Monday 2024-01-01 00:00 UTC
  std::int64_t duration_seconds = 0;
  std::int64_t heartbeat_period_seconds = 30;
  std::int64_t poll_period_seconds = 5;
  std::int64_t tick_period_seconds = 5;
  std::int64_t idle_threshold_seconds = 600;
  std::int64_t command_expiry_seconds = kDefaultCommandExpirySeconds;
  std::int64_t summary_period_seconds = 300;
  std::vector<std::string> watchlist;
  PolicyConfig policy;
  std::vector<MachineSpec> machines;
  std::vector<AdminAction> timeline;  // ordered by `at`

  void validate() const;  // throws Error(kValidation)
};

/// JSON scenario documents. Traces are inline text (`trace`) or a file
/// (`trace_path`, relative to `base_dir`). A missing `policy` disables it.
Scenario scenario_from_json(const nlohmann::json& doc, const std::string& base_dir = ".");
nlohmann::json scenario_to_json(const Scenario& scenario);
Scenario load_scenario(const std::string& path);

// Generators for the shipped scenarios ---------------------------------------

/// Three machines; the admin starts up, scans, lists, opens pc-02, shuts it
/// down and lists again once it has gone quiet.
Scenario sequence_scenario(std::uint64_t seed = 7);

/// 47 CRT and 63 LCD machines under a 10-minute idle LOGOFF policy. Each
/// machine has at most one idle gap, either well under or well over the
/// threshold, so the victim set does not depend on sampling phase.
Scenario lab_scenario(std::uint64_t seed = 110);

/// 180 machines with random benign process tables; exactly `flagged` of them
/// also run a watchlisted process. Near-miss names are mixed in.
Scenario suspicious_scenario(std::uint64_t seed = 180, std::size_t flagged = 38);

}  // namespace fleetwarden
