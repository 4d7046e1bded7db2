#include "fleetwarden/core/env.hpp"

#include "fleetwarden/core/error.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>

namespace fleetwarden {

std::optional<std::string> env_override(std::string_view key) {
  std::string name(kEnvPrefix);
  for (char c : key) name.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

void apply_env_overrides(nlohmann::json& doc, std::initializer_list<std::string_view> keys) {
  for (auto key : keys) {
    auto value = env_override(key);
    if (!value) continue;
    const std::string k(key);
    const bool numeric = doc.contains(k) && doc[k].is_number_integer();
    const bool boolean = doc.contains(k) && doc[k].is_boolean();
    try {
      if (numeric) {
        doc[k] = std::stoll(*value);
      } else if (boolean) {
        doc[k] = (*value == "1" || *value == "true" || *value == "yes");
      } else {
        doc[k] = *value;
      }
    } catch (const std::exception&) {
      throw Error(ErrorCode::kValidation, "environment override for " + k + " is not a number: " + *value);
    }
  }
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot open " + path);
  auto doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::kParse, "invalid JSON in " + path);
  return doc;
}

}  // namespace fleetwarden
