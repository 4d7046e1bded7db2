#include "fleetwarden/ledger/ledger.hpp"

#include "fleetwarden/core/error.hpp"

#include <algorithm>

namespace fleetwarden {

bool is_valid_transition(const CommandEntry& current, const CommandEntry& next) {
  return current.state == CommandState::kPending && is_terminal(next.state) &&
         current.command_id == next.command_id && current.target == next.target && current.kind == next.kind &&
         current.issued_at == next.issued_at && current.expires_at == next.expires_at;
}

void LineLedger::authorize(const Record& record, const Principal& who) const {
  if (const auto* status = std::get_if<StatusEntry>(&record)) {
    if (who.role != Principal::Role::kAgent || !who.agent || *who.agent != status->agent) {
      throw Error(ErrorCode::kUnauthorized, "authorization mismatch: only " + status->agent.str() +
                                                " may append its status entries");
    }
    return;
  }
  const auto& command = std::get<CommandEntry>(record);
  if (command.state == CommandState::kPending) {
    if (who.role != Principal::Role::kController) {
      throw Error(ErrorCode::kUnauthorized, "authorization mismatch: only the controller issues commands");
    }
    return;
  }
  const bool own = who.role == Principal::Role::kAgent && who.agent && *who.agent == command.target;
  const bool controller_expiry = who.role == Principal::Role::kController && command.state == CommandState::kExpired;
  if (!own && !controller_expiry) {
    throw Error(ErrorCode::kUnauthorized,
                "authorization mismatch: command " + command.command_id + " belongs to " + command.target.str());
  }
}

void LineLedger::check_command_locked(const CommandEntry& entry) const {
  auto it = commands_.current.find(entry.command_id);
  if (entry.state == CommandState::kPending) {
    if (it != commands_.current.end()) {
      throw Error(ErrorCode::kAlreadyExists, "command_id already in ledger: " + entry.command_id);
    }
    return;
  }
  if (it == commands_.current.end()) throw Error(ErrorCode::kNotFound, "unknown command_id: " + entry.command_id);
  if (is_terminal(it->second.state)) {
    throw Error(ErrorCode::kLifecycle, "lifecycle violation: command " + entry.command_id + " is already " +
                                           std::string(to_string(it->second.state)));
  }
  if (!is_valid_transition(it->second, entry)) {
    throw Error(ErrorCode::kLifecycle, "lifecycle violation: transition changes immutable fields of " +
                                           entry.command_id);
  }
}

LedgerPosition LineLedger::append(const Record& record, const Principal& who) {
  validate(record);
  authorize(record, who);
  const auto line = encode_record(record);

  if (const auto* status = std::get_if<StatusEntry>(&record)) {
    const auto stream = status_stream(status->agent.str());
    auto guard = [&] {
      std::lock_guard lock(mutex_);
      refresh_status_locked(stream);
      const auto& latest = status_[stream].latest;
      if (latest && latest->key() >= status->key()) {
        throw Error(ErrorCode::kValidation, "invariant violation: seq must strictly increase for " +
                                                status->agent.str());
      }
    };
    return {stream, store_.append(stream, line, guard)};
  }

  const auto& command = std::get<CommandEntry>(record);
  auto guard = [&] {
    std::lock_guard lock(mutex_);
    refresh_commands_locked();
    check_command_locked(command);
  };
  return {std::string(kCommandsStream), store_.append(std::string(kCommandsStream), line, guard)};
}

void LineLedger::refresh_commands_locked() {
  auto chunk = store_.read(std::string(kCommandsStream), commands_.position);
  commands_.position = chunk.next;
  for (const auto& line : chunk.lines) {
    auto decoded = decode_record(line);
    if (!decoded.ok() || !std::holds_alternative<CommandEntry>(decoded.record())) {
      ++commands_.skipped;
      continue;
    }
    auto& entry = std::get<CommandEntry>(decoded.record());
    auto it = commands_.current.find(entry.command_id);
    if (entry.state == CommandState::kPending) {
      if (it != commands_.current.end()) {
        ++commands_.skipped;
        continue;
      }
      commands_.current.emplace(entry.command_id, std::move(entry));
    } else if (it != commands_.current.end() && is_valid_transition(it->second, entry)) {
      it->second = std::move(entry);
    } else {
      ++commands_.skipped;
    }
  }
}

void LineLedger::refresh_status_locked(const std::string& stream) {
  auto& index = status_[stream];
  auto chunk = store_.read(stream, index.position);
  index.position = chunk.next;
  const std::string_view agent = std::string_view(stream).substr(std::string_view("status/").size());
  for (const auto& line : chunk.lines) {
    auto decoded = decode_record(line);
    const auto* entry = decoded.ok() ? std::get_if<StatusEntry>(&decoded.record()) : nullptr;
    if (!entry || entry->agent.str() != agent || (index.latest && index.latest->key() >= entry->key())) {
      ++index.skipped;
      continue;
    }
    index.latest = *entry;
  }
}

LatestSnapshot LineLedger::latest_snapshot() {
  const auto names = store_.streams();
  std::lock_guard lock(mutex_);
  LatestSnapshot snapshot;
  for (const auto& name : names) {
    if (name == kCommandsStream) continue;
    refresh_status_locked(name);
    const auto& index = status_[name];
    snapshot.skipped += index.skipped;
    if (index.latest) snapshot.entries.emplace(index.latest->agent, *index.latest);
  }
  return snapshot;
}

std::map<AgentId, StatusEntry> LineLedger::read_latest_per_agent() { return latest_snapshot().entries; }

std::vector<CommandEntry> LineLedger::read_pending_commands(const AgentId& target, Timestamp now,
                                                           const Principal& who) {
  std::vector<CommandEntry> pending;
  std::vector<std::string> overdue;
  {
    std::lock_guard lock(mutex_);
    refresh_commands_locked();
    for (const auto& [id, entry] : commands_.current) {
      if (entry.target != target || entry.state != CommandState::kPending) continue;
      if (entry.expires_at > now) {
        pending.push_back(entry);
      } else {
        overdue.push_back(id);
      }
    }
  }
  for (const auto& id : overdue) {
    try {
      transition_command(id, CommandState::kExpired, std::string(kExpiredNote), who);
    } catch (const Error& e) {
      // Someone else settled it first.
      if (e.code() != ErrorCode::kLifecycle) throw;
    }
  }
  std::sort(pending.begin(), pending.end(), [](const CommandEntry& a, const CommandEntry& b) {
    return std::tie(a.issued_at, a.command_id) < std::tie(b.issued_at, b.command_id);
  });
  return pending;
}

CommandEntry LineLedger::transition_command(std::string_view command_id, CommandState new_state,
                                            std::optional<std::string> result_note, const Principal& who) {
  if (!is_terminal(new_state)) {
    throw Error(ErrorCode::kLifecycle, "lifecycle violation: cannot transition to PENDING");
  }
  auto current = find_command(command_id);
  if (!current) throw Error(ErrorCode::kNotFound, "unknown command_id: " + std::string(command_id));
  if (is_terminal(current->state)) {
    throw Error(ErrorCode::kLifecycle, "lifecycle violation: command " + current->command_id + " is already " +
                                           std::string(to_string(current->state)));
  }
  CommandEntry next = *current;
  next.state = new_state;
  next.result_note = std::move(result_note);
  append(next, who);
  return next;
}

std::vector<CommandEntry> LineLedger::expire_overdue(Timestamp now) {
  std::vector<std::string> overdue;
  {
    std::lock_guard lock(mutex_);
    refresh_commands_locked();
    for (const auto& [id, entry] : commands_.current) {
      if (entry.state == CommandState::kPending && entry.expires_at <= now) overdue.push_back(id);
    }
  }
  std::vector<CommandEntry> expired;
  for (const auto& id : overdue) {
    try {
      expired.push_back(transition_command(id, CommandState::kExpired, std::string(kExpiredNote),
                                           Principal::controller()));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kLifecycle) throw;
    }
  }
  return expired;
}

std::optional<CommandEntry> LineLedger::find_command(std::string_view command_id) {
  std::lock_guard lock(mutex_);
  refresh_commands_locked();
  auto it = commands_.current.find(command_id);
  if (it == commands_.current.end()) return std::nullopt;
  return it->second;
}

std::vector<CommandEntry> LineLedger::commands() {
  std::vector<CommandEntry> all;
  {
    std::lock_guard lock(mutex_);
    refresh_commands_locked();
    all.reserve(commands_.current.size());
    for (const auto& [_, entry] : commands_.current) all.push_back(entry);
  }
  std::sort(all.begin(), all.end(), [](const CommandEntry& a, const CommandEntry& b) {
    return std::tie(a.issued_at, a.command_id) < std::tie(b.issued_at, b.command_id);
  });
  return all;
}

std::size_t LineLedger::skipped_command_lines() {
  std::lock_guard lock(mutex_);
  refresh_commands_locked();
  return commands_.skipped;
}

ReadBatch LineLedger::read(LedgerCursor& cursor) const {
  ReadBatch batch;
  for (const auto& name : store_.streams()) {
    auto& pos = cursor.positions[name];
    auto chunk = store_.read(name, pos);
    pos = chunk.next;
    for (const auto& line : chunk.lines) {
      auto decoded = decode_record(line);
      if (decoded.ok()) {
        batch.records.push_back(std::move(decoded.record()));
      } else {
        ++batch.skipped;
      }
    }
  }
  return batch;
}

}  // namespace fleetwarden
