#include "fleetwarden/http/documents.hpp"

#include "fleetwarden/core/error.hpp"
#include "fleetwarden/ledger/codec.hpp"

namespace fleetwarden {

using nlohmann::json;

json record_json(const Record& record) { return json::parse(encode_record(record)); }

json machine_json(const MachineRecord& m) {
  return {{"agent", m.agent.str()},
          {"address", m.address},
          {"display_class", to_string(m.display_class)},
          {"power_model", m.power_model},
          {"quarantined", m.quarantined},
          {"last_seen", m.last_seen ? json(*m.last_seen) : json(nullptr)},
          {"registered_at", m.registered_at}};
}

json row_json(const FleetRow& row) {
  json j = machine_json(row.machine);
  j["liveness"] = to_string(row.liveness);
  j["badge"] = row.machine.quarantined ? std::string_view("QUARANTINED") : to_string(row.liveness);
  j["suspicious"] = row.suspicious;
  if (row.latest) {
    j["status"] = to_string(row.latest->status);
    j["idle_seconds"] = row.latest->idle_seconds;
    j["seq"] = row.latest->seq;
    j["boot"] = row.latest->boot;
    j["latest"] = record_json(*row.latest);
  } else {
    j["status"] = nullptr;
    j["latest"] = nullptr;
  }
  return j;
}

json fleet_json(const FleetView& view) {
  json rows = json::array();
  for (const auto& r : view.rows) rows.push_back(row_json(r));
  return {{"schema", kApiSchemaVersion}, {"at", view.at}, {"rows", rows}};
}

json detail_json(const MachineDetail& d) {
  json commands = json::array();
  for (const auto& c : d.commands) commands.push_back(record_json(c));
  return {{"schema", kApiSchemaVersion}, {"machine", row_json(d.row)}, {"commands", commands}};
}

json event_json(const FleetEvent& e) { return json::parse(encode_event(e)); }

json energy_json(const EnergyReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"agent", row.agent.str()},
                    {"power_model", row.power_model},
                    {"actual_wh", to_wh(row.actual)},
                    {"baseline_wh", to_wh(row.baseline)},
                    {"saved_wh", to_wh(row.baseline - row.actual)},
                    {"actual_mws", row.actual},
                    {"baseline_mws", row.baseline}});
  }
  return {{"schema", kApiSchemaVersion},
          {"since", r.since},
          {"until", r.until},
          {"rows", rows},
          {"total",
           {{"actual_wh", to_wh(r.actual)},
            {"baseline_wh", to_wh(r.baseline)},
            {"saved_wh", to_wh(r.saved())},
            {"saved_fraction", r.baseline == 0 ? 0.0 : static_cast<double>(r.saved()) / r.baseline},
            {"actual_mws", r.actual},
            {"baseline_mws", r.baseline}}}};
}

json records_document(const std::vector<std::string>& lines) {
  return {{"schema", kApiSchemaVersion}, {"records", lines}};
}

std::vector<std::string> lines_of(const json& document) {
  if (!document.is_object() || !document.contains("schema") || !document.contains("records")) {
    throw Error(ErrorCode::kParse, "expected {\"schema\":1,\"records\":[...]}");
  }
  if (document.at("schema") != kApiSchemaVersion) throw Error(ErrorCode::kUnknownVersion, "unsupported schema version");
  try {
    return document.at("records").get<std::vector<std::string>>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::kParse, "records must be an array of strings");
  }
}

json error_document(ErrorCode code, std::string_view message) {
  return {{"schema", kApiSchemaVersion}, {"error", {{"code", to_string(code)}, {"message", message}}}};
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kAlreadyExists:
    case ErrorCode::kLifecycle: return 409;
    case ErrorCode::kUnauthorized: return 403;
    case ErrorCode::kTransportUnavailable:
    case ErrorCode::kStorage: return 503;
    default: return 400;
  }
}

}  // namespace fleetwarden
