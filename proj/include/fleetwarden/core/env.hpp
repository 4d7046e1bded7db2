#pragma once

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <string_view>

namespace fleetwarden {

inline constexpr std::string_view kEnvPrefix = "FLEETWARDEN_";

/// Returns the FLEETWARDEN_<KEY> environment override for a config key.
std::optional<std::string> env_override(std::string_view key);

/// Applies env overrides to every key listed in `keys`, converting the
/// string value to the JSON type already present in `doc` (or string).
void apply_env_overrides(nlohmann::json& doc, std::initializer_list<std::string_view> keys);

nlohmann::json read_json_file(const std::string& path);

}  // namespace fleetwarden
