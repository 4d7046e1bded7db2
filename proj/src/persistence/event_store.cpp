#include "fleetwarden/persistence/event_store.hpp"

#include "fleetwarden/core/error.hpp"
#include "fleetwarden/ledger/codec.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

namespace fleetwarden {

using nlohmann::json;

namespace {

constexpr int kEventSchemaVersion = 1;

constexpr std::array<std::string_view, 7> kKindNames = {
    "REGISTERED",         "HEARTBEAT_SUMMARY",  "COMMAND_ISSUED", "COMMAND_TRANSITIONED",
    "QUARANTINE_CHANGED", "SUSPICIOUS_FLAGGED", "SCAN_COMPLETED",
};

FleetEvent make(EventKind kind, std::optional<AgentId> agent, Timestamp at, json payload) {
  FleetEvent e;
  e.kind = kind;
  e.agent = std::move(agent);
  e.at = at;
  e.payload = std::move(payload);
  return e;
}

json command_json(const CommandEntry& command) { return json::parse(encode_record(command)); }

CommandEntry command_of(const json& j) {
  auto decoded = decode_record(j.dump());
  if (!decoded.ok() || !std::holds_alternative<CommandEntry>(decoded.record())) {
    throw Error(ErrorCode::kMalformed, "event payload is not a command: " +
                                           (decoded.ok() ? std::string("status record") : decoded.error().message));
  }
  return std::get<CommandEntry>(decoded.record());
}

std::string errno_text() { return std::strerror(errno); }

}  // namespace

std::string_view to_string(EventKind k) { return kKindNames[static_cast<std::size_t>(k)]; }

std::optional<EventKind> parse_event_kind(std::string_view text) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == text) return static_cast<EventKind>(i);
  }
  return std::nullopt;
}

FleetEvent registered_event(const MachineRecord& r) {
  return make(EventKind::kRegistered, r.agent, r.registered_at,
              {{"address", r.address},
               {"display_class", to_string(r.display_class)},
               {"power_model", r.power_model}});
}

FleetEvent command_issued_event(const CommandEntry& command, Timestamp at) {
  return make(EventKind::kCommandIssued, command.target, at, command_json(command));
}

FleetEvent command_transitioned_event(const CommandEntry& command, Timestamp at) {
  return make(EventKind::kCommandTransitioned, command.target, at, command_json(command));
}

FleetEvent quarantine_event(const AgentId& agent, bool on, Timestamp at) {
  return make(EventKind::kQuarantineChanged, agent, at, {{"on", on}});
}

FleetEvent summary_event(const Occupancy& o, Timestamp at) {
  json seconds = json::object();
  for (std::size_t i = 0; i < kEnergyStateCount; ++i) seconds[std::string(to_string(static_cast<EnergyState>(i)))] = o.seconds[i];
  return make(EventKind::kHeartbeatSummary, o.agent, at, {{"start", o.start}, {"end", o.end}, {"seconds", seconds}});
}

FleetEvent suspicious_event(const AgentId& agent, const std::vector<std::string>& names, Timestamp at) {
  return make(EventKind::kSuspiciousFlagged, agent, at, {{"processes", names}});
}

FleetEvent scan_event(const std::string& range, const std::vector<std::string>& found, Timestamp at) {
  return make(EventKind::kScanCompleted, std::nullopt, at, {{"range", range}, {"found", found}});
}

MachineRecord machine_from_event(const FleetEvent& e) {
  if (e.kind != EventKind::kRegistered || !e.agent) throw Error(ErrorCode::kMalformed, "not a REGISTERED event");
  try {
    const auto cls = parse_display_class(e.payload.at("display_class").get<std::string>());
    if (!cls) throw Error(ErrorCode::kMalformed, "unknown display class in event " + std::to_string(e.event_id));
    return MachineRecord{.agent = *e.agent,
                         .address = e.payload.at("address").get<std::string>(),
                         .display_class = *cls,
                         .power_model = e.payload.at("power_model").get<std::string>(),
                         .quarantined = false,
                         .last_seen = std::nullopt,
                         .registered_at = e.at};
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::kMalformed, std::string("REGISTERED payload: ") + ex.what());
  }
}

CommandEntry command_from_event(const FleetEvent& e) { return command_of(e.payload); }

Occupancy occupancy_from_event(const FleetEvent& e) {
  if (e.kind != EventKind::kHeartbeatSummary || !e.agent) throw Error(ErrorCode::kMalformed, "not a summary event");
  try {
    Occupancy o{.agent = *e.agent, .start = e.payload.at("start").get<Timestamp>(), .end = e.payload.at("end").get<Timestamp>()};
    const auto& seconds = e.payload.at("seconds");
    for (std::size_t i = 0; i < kEnergyStateCount; ++i) {
      o.seconds[i] = seconds.value(std::string(to_string(static_cast<EnergyState>(i))), std::int64_t{0});
    }
    return o;
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::kMalformed, std::string("HEARTBEAT_SUMMARY payload: ") + ex.what());
  }
}

std::string encode_event(const FleetEvent& e) {
  json j = {{"v", kEventSchemaVersion},
            {"type", "event"},
            {"id", e.event_id},
            {"at", e.at},
            {"kind", to_string(e.kind)},
            {"payload", e.payload}};
  if (e.agent) j["agent"] = e.agent->str();
  return j.dump(-1, ' ', false, json::error_handler_t::strict);
}

FleetEvent decode_event(std::string_view line) {
  try {
    const auto j = json::parse(line);
    if (!j.is_object() || j.value("type", "") != "event") throw Error(ErrorCode::kMalformed, "not an event record");
    if (j.at("v").get<int>() != kEventSchemaVersion) throw Error(ErrorCode::kMalformed, "unknown event schema version");
    FleetEvent e;
    e.event_id = j.at("id").get<EventId>();
    e.at = j.at("at").get<Timestamp>();
    const auto kind = parse_event_kind(j.at("kind").get<std::string>());
    if (!kind) throw Error(ErrorCode::kMalformed, "unknown event kind");
    e.kind = *kind;
    if (j.contains("agent")) e.agent = AgentId::parse(j.at("agent").get<std::string>());
    e.payload = j.at("payload");
    return e;
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::kMalformed, std::string("malformed event: ") + ex.what());
  } catch (const Error& ex) {
    throw Error(ErrorCode::kMalformed, ex.what());
  }
}

std::vector<AgentId> Snapshot::quarantined() const {
  std::vector<AgentId> out;
  for (const auto& [agent, record] : registry) {
    if (record.quarantined) out.push_back(agent);
  }
  return out;
}

Snapshot apply(Snapshot s, const FleetEvent& e) {
  switch (e.kind) {
    case EventKind::kRegistered: {
      auto record = machine_from_event(e);
      s.registry.try_emplace(record.agent, std::move(record));
      break;
    }
    case EventKind::kQuarantineChanged:
      if (e.agent) {
        if (auto it = s.registry.find(*e.agent); it != s.registry.end()) it->second.quarantined = e.payload.value("on", false);
      }
      break;
    case EventKind::kCommandIssued: {
      auto command = command_of(e.payload);
      if (command.state == CommandState::kPending) s.open_commands.try_emplace(command.command_id, std::move(command));
      break;
    }
    case EventKind::kCommandTransitioned: {
      const auto command = command_of(e.payload);
      if (is_terminal(command.state)) s.open_commands.erase(command.command_id);
      break;
    }
    case EventKind::kHeartbeatSummary:
    case EventKind::kSuspiciousFlagged:
    case EventKind::kScanCompleted:
      break;
  }
  return s;
}

bool matches(const HistoryFilter& f, const FleetEvent& e) {
  if (f.agent && (!e.agent || *e.agent != *f.agent)) return false;
  if (f.kind && e.kind != *f.kind) return false;
  if (f.since && e.at < *f.since) return false;
  if (f.until && e.at > *f.until) return false;
  return true;
}

EventId MemoryEventStore::append(FleetEvent event) {
  std::unique_lock lock(mutex_);
  event.event_id = events_.empty() ? 1 : events_.back().event_id + 1;
  events_.push_back(std::move(event));
  return events_.back().event_id;
}

std::vector<FleetEvent> MemoryEventStore::events() const {
  std::shared_lock lock(mutex_);
  return events_;
}

EventId MemoryEventStore::last_id() const {
  std::shared_lock lock(mutex_);
  return events_.empty() ? 0 : events_.back().event_id;
}

FileEventStore::FileEventStore(const std::filesystem::path& data_dir) : path_(data_dir / "events.log") {
  std::error_code ec;
  std::filesystem::create_directories(data_dir, ec);
  if (ec) throw Error(ErrorCode::kStorage, "cannot create " + data_dir.string() + ": " + ec.message());
  fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) throw Error(ErrorCode::kStorage, "cannot open " + path_.string() + ": " + errno_text());
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    throw Error(ErrorCode::kStorage, path_.string() + " is in use by another process");
  }

  std::ifstream in(path_, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string data = buffer.str();

  std::size_t good_end = 0;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < data.size()) {
    ++line_no;
    const auto nl = data.find('\n', pos);
    const bool terminated = nl != std::string::npos;
    const std::string_view line(data.data() + pos, (terminated ? nl : data.size()) - pos);
    const std::size_t next = terminated ? nl + 1 : data.size();
    const bool last = next >= data.size();
    try {
      if (!terminated) throw Error(ErrorCode::kMalformed, "unterminated line");
      auto event = decode_event(line);
      if (!events_.empty() && event.event_id <= events_.back().event_id) {
        throw Error(ErrorCode::kMalformed, "event id " + std::to_string(event.event_id) + " does not increase");
      }
      events_.push_back(std::move(event));
      good_end = next;
    } catch (const Error& e) {
      if (!last) {
        ::close(fd_);
        throw Error(ErrorCode::kStorage, path_.string() + ": corrupt record at line " + std::to_string(line_no) +
                                             " (byte " + std::to_string(pos) + "): " + e.what() +
                                             ". To recover, restore from backup or truncate the file to " +
                                             std::to_string(pos) + " bytes and accept the loss of later events.");
      }
      ++skipped_;
    }
    pos = next;
  }
  if (good_end < data.size()) {
    if (::ftruncate(fd_, static_cast<off_t>(good_end)) != 0) {
      ::close(fd_);
      throw Error(ErrorCode::kStorage, "cannot truncate torn tail of " + path_.string() + ": " + errno_text());
    }
  }
}

FileEventStore::~FileEventStore() {
  if (fd_ >= 0) ::close(fd_);
}

EventId FileEventStore::append(FleetEvent event) {
  std::unique_lock lock(mutex_);
  event.event_id = events_.empty() ? 1 : events_.back().event_id + 1;
  const std::string line = encode_event(event) + "\n";
  std::size_t written = 0;
  while (written < line.size()) {
    const auto n = ::write(fd_, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::kStorage, "append to " + path_.string() + " failed: " + errno_text());
    }
    written += static_cast<std::size_t>(n);
  }
  if (::fdatasync(fd_) != 0) throw Error(ErrorCode::kStorage, "fsync of " + path_.string() + " failed: " + errno_text());
  events_.push_back(std::move(event));
  return events_.back().event_id;
}

std::vector<FleetEvent> FileEventStore::events() const {
  std::shared_lock lock(mutex_);
  return events_;
}

EventId FileEventStore::last_id() const {
  std::shared_lock lock(mutex_);
  return events_.empty() ? 0 : events_.back().event_id;
}

Snapshot replay(const EventStore& store, std::optional<EventId> upto) {
  Snapshot s;
  for (const auto& e : store.events()) {
    if (upto && e.event_id > *upto) break;
    s = apply(std::move(s), e);
  }
  return s;
}

std::vector<FleetEvent> query_history(const EventStore& store, const HistoryFilter& filter) {
  if (filter.since && filter.until && *filter.since > *filter.until) {
    throw Error(ErrorCode::kInvalidArgument, "inverted range: since " + std::to_string(*filter.since) + " > until " +
                                                 std::to_string(*filter.until));
  }
  std::vector<FleetEvent> out;
  for (auto& e : store.events()) {
    if (matches(filter, e)) out.push_back(std::move(e));
  }
  return out;
}

}  // namespace fleetwarden
