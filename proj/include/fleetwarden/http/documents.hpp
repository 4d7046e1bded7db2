#pragma once

#include "fleetwarden/controller/controller.hpp"
#include "fleetwarden/core/error.hpp"

#include <nlohmann/json.hpp>

namespace fleetwarden {

/// Schema version of every API request and response document.
inline constexpr int kApiSchemaVersion = 1;

nlohmann::json record_json(const Record& record);  // the ledger line as a JSON object
nlohmann::json machine_json(const MachineRecord& machine);
nlohmann::json row_json(const FleetRow& row);
nlohmann::json fleet_json(const FleetView& view);
nlohmann::json detail_json(const MachineDetail& detail);
nlohmann::json event_json(const FleetEvent& event);
nlohmann::json energy_json(const EnergyReport& report);

/// Wraps ledger lines: {"schema":1,"records":[...]}.
nlohmann::json records_document(const std::vector<std::string>& lines);
/// Throws Error(kParse) for a document of the wrong shape or schema.
std::vector<std::string> lines_of(const nlohmann::json& document);

nlohmann::json error_document(ErrorCode code, std::string_view message);
int http_status(ErrorCode code);

}  // namespace fleetwarden
