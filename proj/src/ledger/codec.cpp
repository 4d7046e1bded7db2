#include "fleetwarden/ledger/codec.hpp"

#include "fleetwarden/core/error.hpp"

#include <nlohmann/json.hpp>

#include <limits>

namespace fleetwarden {

namespace {

using nlohmann::json;

nlohmann::json to_json(const StatusEntry& e) {
  json procs = json::array();
  for (const auto& p : e.processes) {
    procs.push_back({{"name", p.name}, {"pid", p.pid}, {"memory_kb", p.memory_kb}});
  }
  return {
      {"type", "status"},
      {"v", kLedgerSchemaVersion},
      {"agent", e.agent.str()},
      {"boot", e.boot},
      {"seq", e.seq},
      {"timestamp", e.timestamp},
      {"status", to_string(e.status)},
      {"idle_seconds", e.idle_seconds},
      {"processes", std::move(procs)},
      {"traffic",
       {{"rx_bytes", e.traffic.rx_bytes},
        {"tx_bytes", e.traffic.tx_bytes},
        {"rx_packets", e.traffic.rx_packets},
        {"tx_packets", e.traffic.tx_packets}}},
      {"degraded", e.degraded},
      {"traffic_reset", e.traffic_reset},
  };
}

nlohmann::json to_json(const CommandEntry& e) {
  json j = {
      {"type", "command"},
      {"v", kLedgerSchemaVersion},
      {"command_id", e.command_id},
      {"target", e.target.str()},
      {"kind", to_string(e.kind)},
      {"issued_at", e.issued_at},
      {"expires_at", e.expires_at},
      {"state", to_string(e.state)},
  };
  if (e.result_note) j["result_note"] = *e.result_note;
  return j;
}

// Thrown internally while decoding; converted to DecodeError at the boundary.
struct Reject {
  DecodeErrorKind kind;
  std::string message;
};

[[noreturn]] void malformed(const std::string& what) {
  throw Reject{DecodeErrorKind::kMalformed, "malformed record: " + what};
}

[[noreturn]] void violation(const std::string& field) {
  throw Reject{DecodeErrorKind::kInvariantViolation, "invariant violation: " + field};
}

const json& field(const json& obj, const char* name) {
  auto it = obj.find(name);
  if (it == obj.end()) malformed(std::string("missing field ") + name);
  return *it;
}

std::string get_string(const json& obj, const char* name) {
  const auto& v = field(obj, name);
  if (!v.is_string()) malformed(std::string("field ") + name + " is not a string");
  return v.get<std::string>();
}

std::int64_t get_int(const json& obj, const char* name) {
  const auto& v = field(obj, name);
  if (v.is_number_unsigned()) {
    const auto u = v.get<std::uint64_t>();
    if (u > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
      malformed(std::string("field ") + name + " out of range");
    }
    return static_cast<std::int64_t>(u);
  }
  if (!v.is_number_integer()) malformed(std::string("field ") + name + " is not an integer");
  return v.get<std::int64_t>();
}

std::uint64_t get_uint(const json& obj, const char* name, const std::string& path) {
  const auto& v = field(obj, name);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) violation(path);  // negative
  malformed(std::string("field ") + name + " is not an integer");
}

bool get_bool(const json& obj, const char* name) {
  auto it = obj.find(name);
  if (it == obj.end()) return false;
  if (!it->is_boolean()) malformed(std::string("field ") + name + " is not a boolean");
  return it->get<bool>();
}

AgentId get_agent(const json& obj, const char* name) {
  auto id = AgentId::try_parse(get_string(obj, name));
  if (!id) violation(name);
  return *id;
}

StatusEntry status_from_json(const json& j) {
  StatusEntry e{.agent = get_agent(j, "agent")};
  e.boot = get_int(j, "boot");
  e.seq = get_uint(j, "seq", "seq");
  e.timestamp = get_int(j, "timestamp");
  auto status = parse_status(get_string(j, "status"));
  if (!status) malformed("unknown status");
  e.status = *status;
  e.idle_seconds = get_int(j, "idle_seconds");
  const auto& procs = field(j, "processes");
  if (!procs.is_array()) malformed("processes is not an array");
  e.processes.reserve(procs.size());
  for (const auto& p : procs) {
    if (!p.is_object()) malformed("process entry is not an object");
    e.processes.push_back({get_string(p, "name"), get_int(p, "pid"), get_int(p, "memory_kb")});
  }
  const auto& t = field(j, "traffic");
  if (!t.is_object()) malformed("traffic is not an object");
  e.traffic.rx_bytes = get_uint(t, "rx_bytes", "traffic.rx_bytes");
  e.traffic.tx_bytes = get_uint(t, "tx_bytes", "traffic.tx_bytes");
  e.traffic.rx_packets = get_uint(t, "rx_packets", "traffic.rx_packets");
  e.traffic.tx_packets = get_uint(t, "tx_packets", "traffic.tx_packets");
  e.degraded = get_bool(j, "degraded");
  e.traffic_reset = get_bool(j, "traffic_reset");
  return e;
}

CommandEntry command_from_json(const json& j) {
  CommandEntry e{.command_id = get_string(j, "command_id"), .target = get_agent(j, "target")};
  auto kind = parse_command_kind(get_string(j, "kind"));
  if (!kind) malformed("unknown command kind");
  e.kind = *kind;
  e.issued_at = get_int(j, "issued_at");
  e.expires_at = get_int(j, "expires_at");
  auto state = parse_command_state(get_string(j, "state"));
  if (!state) malformed("unknown command state");
  e.state = *state;
  if (auto it = j.find("result_note"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) malformed("result_note is not a string");
    e.result_note = it->get<std::string>();
  }
  return e;
}

}  // namespace

std::string encode_record(const Record& record) {
  validate(record);
  const json j = std::visit([](const auto& r) { return to_json(r); }, record);
  try {
    return j.dump();
  } catch (const json::type_error&) {
    throw Error(ErrorCode::kValidation, "invariant violation: string field is not valid UTF-8");
  }
}

Decoded decode_record(std::string_view line) noexcept {
  try {
    if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
    if (line.empty()) return DecodeError{DecodeErrorKind::kMalformed, "malformed record"};
    auto j = json::parse(line.begin(), line.end(), nullptr, false);
    if (j.is_discarded() || !j.is_object()) return DecodeError{DecodeErrorKind::kMalformed, "malformed record"};

    const auto type = get_string(j, "type");
    if (type != "status" && type != "command") {
      return DecodeError{DecodeErrorKind::kUnknownType, "unknown record type: " + type};
    }
    if (get_int(j, "v") != kLedgerSchemaVersion) {
      return DecodeError{DecodeErrorKind::kUnknownVersion, "unknown schema version"};
    }
    Record record = type == "status" ? Record(status_from_json(j)) : Record(command_from_json(j));
    try {
      validate(record);
    } catch (const Error& e) {
      return DecodeError{DecodeErrorKind::kInvariantViolation, e.what()};
    }
    return record;
  } catch (const Reject& r) {
    return DecodeError{r.kind, r.message};
  } catch (const std::exception& e) {
    return DecodeError{DecodeErrorKind::kMalformed, std::string("malformed record: ") + e.what()};
  }
}

}  // namespace fleetwarden
