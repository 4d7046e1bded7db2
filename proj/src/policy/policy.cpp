#include "fleetwarden/policy/policy.hpp"

#include "fleetwarden/core/env.hpp"
#include "fleetwarden/core/error.hpp"

#include <nlohmann/json.hpp>

#include <set>

namespace fleetwarden {

void PolicyConfig::validate() const {
  if (idle_threshold_seconds <= 0) throw Error(ErrorCode::kValidation, "idle_threshold_seconds must be positive");
  if (grace_after_boot_seconds < 0) throw Error(ErrorCode::kValidation, "grace_after_boot_seconds must be >= 0");
}

namespace {

CommandKind kind_field(const nlohmann::json& doc, const char* key, CommandKind fallback) {
  if (!doc.contains(key)) return fallback;
  const auto text = doc.at(key).get<std::string>();
  const auto kind = parse_command_kind(text);
  if (!kind) throw Error(ErrorCode::kValidation, std::string(key) + ": unknown command kind '" + text + "'");
  return *kind;
}

}  // namespace

PolicyConfig policy_config_from_json(const nlohmann::json& doc) {
  PolicyConfig config;
  try {
    config.idle_threshold_seconds = doc.value("idle_threshold_seconds", config.idle_threshold_seconds);
    config.idle_action = kind_field(doc, "idle_action", config.idle_action);
    if (doc.contains("work_hours")) config.work_hours = WeeklySchedule::parse(doc.at("work_hours").get<std::string>());
    config.after_hours_action = kind_field(doc, "after_hours_action", config.after_hours_action);
    config.grace_after_boot_seconds = doc.value("grace_after_boot_seconds", config.grace_after_boot_seconds);
    config.enabled = doc.value("enabled", config.enabled);
    if (doc.contains("utc_offset_seconds") && !doc.at("utc_offset_seconds").is_null()) {
      config.utc_offset_seconds = doc.at("utc_offset_seconds").get<std::int64_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kValidation, std::string("policy config: ") + e.what());
  }
  config.validate();
  return config;
}

nlohmann::json policy_config_to_json(const PolicyConfig& config) {
  nlohmann::json doc = {
      {"idle_threshold_seconds", config.idle_threshold_seconds},
      {"idle_action", to_string(config.idle_action)},
      {"work_hours", config.work_hours.format()},
      {"after_hours_action", to_string(config.after_hours_action)},
      {"grace_after_boot_seconds", config.grace_after_boot_seconds},
      {"enabled", config.enabled},
  };
  if (config.utc_offset_seconds) doc["utc_offset_seconds"] = *config.utc_offset_seconds;
  return doc;
}

PolicyConfig load_policy_config(const std::string& path) { return policy_config_from_json(read_json_file(path)); }

std::string_view to_string(PolicyReason r) { return r == PolicyReason::kAfterHours ? "after-hours" : "idle"; }

std::vector<PolicyDecision> evaluate(const FleetView& view, const PolicyConfig& config,
                                     const std::vector<CommandEntry>& commands, Timestamp now) {
  std::vector<PolicyDecision> out;
  if (!config.enabled) return out;

  std::set<AgentId> blocked;
  for (const auto& c : commands) {
    if (c.state == CommandState::kPending) blocked.insert(c.target);
  }
  const auto already_issued = [&](const AgentId& agent, CommandKind kind, Timestamp since) {
    for (const auto& c : commands) {
      if (c.target == agent && c.kind == kind && c.state != CommandState::kExpired && c.issued_at >= since) return true;
    }
    return false;
  };

  const auto local = local_time(now, config.utc_offset_seconds);
  const bool after_hours = !config.work_hours.contains(local.day, local.minute);

  for (const auto& row : view.rows) {
    if (row.liveness != Liveness::kActive || row.machine.quarantined || !row.latest) continue;
    const auto& latest = *row.latest;
    if (blocked.contains(row.machine.agent)) continue;
    if (now - latest.boot < config.grace_after_boot_seconds) continue;

    if (after_hours && !already_issued(row.machine.agent, config.after_hours_action, latest.boot)) {
      out.push_back({row.machine.agent, config.after_hours_action, PolicyReason::kAfterHours});
      continue;
    }
    if (latest.status == Status::kIdle && latest.idle_seconds >= config.idle_threshold_seconds) {
      const Timestamp episode_start = latest.timestamp - latest.idle_seconds;
      if (!already_issued(row.machine.agent, config.idle_action, episode_start)) {
        out.push_back({row.machine.agent, config.idle_action, PolicyReason::kIdle});
      }
    }
  }
  return out;
}

}  // namespace fleetwarden
