#pragma once

#include "fleetwarden/controller/fleet_view.hpp"
#include "fleetwarden/policy/schedule.hpp"

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <string>
#include <vector>

namespace fleetwarden {

struct PolicyConfig {
  std::int64_t idle_threshold_seconds = 600;
  CommandKind idle_action = CommandKind::kHibernate;
  WeeklySchedule work_hours = WeeklySchedule::always();
  CommandKind after_hours_action = CommandKind::kShutdown;
  std::int64_t grace_after_boot_seconds = 600;
  bool enabled = true;
  /// Fixed offset for work_hours; unset means the controller's local zone.
  std::optional<std::int64_t> utc_offset_seconds;

  void validate() const;  // throws Error(kValidation)
};

PolicyConfig policy_config_from_json(const nlohmann::json& doc);
nlohmann::json policy_config_to_json(const PolicyConfig& config);
PolicyConfig load_policy_config(const std::string& path);

enum class PolicyReason { kAfterHours, kIdle };

std::string_view to_string(PolicyReason r);

struct PolicyDecision {
  AgentId agent;
  CommandKind kind = CommandKind::kShutdown;
  PolicyReason reason = PolicyReason::kIdle;

  friend bool operator==(const PolicyDecision&, const PolicyDecision&) = default;
};

/// At most one command per ACTIVE, non-quarantined machine past its boot
/// grace period. Any PENDING command for a machine blocks it entirely;
/// after-hours wins over idle.
///
/// `commands` may also hold settled commands: an idle action already issued
/// (and not expired) since the machine's last input, or an after-hours action
/// already issued during the current boot, is not repeated.
std::vector<PolicyDecision> evaluate(const FleetView& view, const PolicyConfig& config,
                                     const std::vector<CommandEntry>& commands, Timestamp now);

}  // namespace fleetwarden
