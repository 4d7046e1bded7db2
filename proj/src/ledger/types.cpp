#include "fleetwarden/ledger/types.hpp"

#include "fleetwarden/core/error.hpp"

#include <algorithm>
#include <cctype>

namespace fleetwarden {

namespace {

std::string upper(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

[[noreturn]] void invalid(const std::string& field) {
  throw Error(ErrorCode::kValidation, "invariant violation: " + field);
}

}  // namespace

bool AgentId::is_valid(std::string_view value) noexcept {
  if (value.empty() || value.size() > kMaxLength) return false;
  if (value == "." || value == "..") return false;
  return std::none_of(value.begin(), value.end(), [](char c) {
    const auto u = static_cast<unsigned char>(c);
    return c == '/' || c == '\\' || u < 0x20 || u == 0x7f;
  });
}

AgentId AgentId::parse(std::string_view value) {
  if (!is_valid(value)) invalid("agent");
  return AgentId(std::string(value));
}

std::optional<AgentId> AgentId::try_parse(std::string_view value) noexcept {
  if (!is_valid(value)) return std::nullopt;
  return AgentId(std::string(value));
}

std::string_view to_string(Status s) { return s == Status::kBusy ? "BUSY" : "IDLE"; }

std::string_view to_string(CommandKind k) {
  switch (k) {
    case CommandKind::kShutdown: return "SHUTDOWN";
    case CommandKind::kRestart: return "RESTART";
    case CommandKind::kLogoff: return "LOGOFF";
    case CommandKind::kHibernate: return "HIBERNATE";
  }
  return "?";
}

std::string_view to_string(CommandState s) {
  switch (s) {
    case CommandState::kPending: return "PENDING";
    case CommandState::kExecuted: return "EXECUTED";
    case CommandState::kFailed: return "FAILED";
    case CommandState::kExpired: return "EXPIRED";
  }
  return "?";
}

std::optional<Status> parse_status(std::string_view text) {
  const auto u = upper(text);
  if (u == "BUSY") return Status::kBusy;
  if (u == "IDLE") return Status::kIdle;
  return std::nullopt;
}

std::optional<CommandKind> parse_command_kind(std::string_view text) {
  const auto u = upper(text);
  for (auto k : {CommandKind::kShutdown, CommandKind::kRestart, CommandKind::kLogoff, CommandKind::kHibernate}) {
    if (u == to_string(k)) return k;
  }
  return std::nullopt;
}

std::optional<CommandState> parse_command_state(std::string_view text) {
  const auto u = upper(text);
  for (auto s : {CommandState::kPending, CommandState::kExecuted, CommandState::kFailed, CommandState::kExpired}) {
    if (u == to_string(s)) return s;
  }
  return std::nullopt;
}

void validate(const StatusEntry& entry) {
  if (!AgentId::is_valid(entry.agent.str())) invalid("agent");
  if (entry.boot < 0) invalid("boot");
  if (entry.timestamp < 0) invalid("timestamp");
  if (entry.idle_seconds < 0) invalid("idle_seconds");
  for (std::size_t i = 0; i < entry.processes.size(); ++i) {
    const auto& p = entry.processes[i];
    const auto where = "processes[" + std::to_string(i) + "]";
    if (p.name.empty()) invalid(where + ".name");
    if (p.pid <= 0) invalid(where + ".pid");
    if (p.memory_kb < 0) invalid(where + ".memory_kb");
  }
}

void validate(const CommandEntry& entry) {
  if (entry.command_id.empty() || entry.command_id.size() > 128) invalid("command_id");
  for (char c : entry.command_id) {
    const auto u = static_cast<unsigned char>(c);
    if (u < 0x21 || u == 0x7f || c == '/') invalid("command_id");
  }
  if (!AgentId::is_valid(entry.target.str())) invalid("target");
  if (entry.expires_at <= entry.issued_at) invalid("expires_at");
}

void validate(const Record& record) {
  std::visit([](const auto& r) { validate(r); }, record);
}

}  // namespace fleetwarden
