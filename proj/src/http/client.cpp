#include "fleetwarden/http/client.hpp"

#include "fleetwarden/core/error.hpp"
#include "fleetwarden/http/documents.hpp"
#include "fleetwarden/ledger/codec.hpp"

#include <httplib.h>

namespace fleetwarden {

using nlohmann::json;

std::string url_encode(std::string_view text) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xf]);
    }
  }
  return out;
}

ApiClient::ApiClient(const std::string& endpoint, std::string token, std::optional<AgentId> agent,
                     std::chrono::milliseconds timeout)
    : client_(std::make_unique<httplib::Client>(endpoint)), token_(std::move(token)), agent_(std::move(agent)) {
  if (!client_->is_valid()) throw Error(ErrorCode::kInvalidArgument, "bad endpoint: " + endpoint);
  client_->set_connection_timeout(timeout);
  client_->set_read_timeout(timeout);
  client_->set_write_timeout(timeout);
  client_->set_bearer_token_auth(token_);
  if (agent_) client_->set_default_headers({{"X-Fleet-Agent", agent_->str()}});
}

ApiClient::~ApiClient() = default;

json ApiClient::handle(const std::string& what, int status, const std::string& body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception&) {
    throw Error(status >= 500 ? ErrorCode::kTransportUnavailable : ErrorCode::kMalformed,
                what + ": HTTP " + std::to_string(status) + " with a non-JSON body");
  }
  if (status >= 200 && status < 300) return doc;
  ErrorCode code = status >= 500 ? ErrorCode::kTransportUnavailable : ErrorCode::kInvalidArgument;
  std::string message = what + ": HTTP " + std::to_string(status);
  if (doc.contains("error")) {
    if (auto parsed = parse_error_code(doc["error"].value("code", ""))) code = *parsed;
    message = doc["error"].value("message", message);
  }
  throw Error(code, message);
}

json ApiClient::get(const std::string& path) {
  std::lock_guard lock(mutex_);
  auto res = client_->Get(path);
  if (!res) throw Error(ErrorCode::kTransportUnavailable, "GET " + path + ": " + httplib::to_string(res.error()));
  return handle("GET " + path, res->status, res->body);
}

json ApiClient::post(const std::string& path, const json& body) {
  std::lock_guard lock(mutex_);
  auto res = client_->Post(path, body.dump(), "application/json");
  if (!res) throw Error(ErrorCode::kTransportUnavailable, "POST " + path + ": " + httplib::to_string(res.error()));
  return handle("POST " + path, res->status, res->body);
}

namespace {

Record decode_line(const std::string& line) {
  auto decoded = decode_record(line);
  if (!decoded.ok()) throw Error(ErrorCode::kMalformed, "bad record from server: " + decoded.error().message);
  return decoded.record();
}

}  // namespace

HttpLedgerClient::HttpLedgerClient(const std::string& endpoint, std::string token, std::optional<AgentId> agent,
                                   std::chrono::milliseconds timeout)
    : api_(endpoint, std::move(token), std::move(agent), timeout) {}

LedgerPosition HttpLedgerClient::append(const Record& record) {
  const bool status = std::holds_alternative<StatusEntry>(record);
  api_.post(status ? "/v1/ledger/status" : "/v1/ledger/commands", records_document({encode_record(record)}));
  // The server owns positions; remote writers only learn the stream.
  return {status ? status_stream(std::get<StatusEntry>(record).agent.str()) : std::string(kCommandsStream), {}};
}

std::map<AgentId, StatusEntry> HttpLedgerClient::read_latest_per_agent() {
  std::map<AgentId, StatusEntry> out;
  for (const auto& line : lines_of(api_.get("/v1/ledger/status/latest"))) {
    auto record = decode_line(line);
    if (auto* e = std::get_if<StatusEntry>(&record)) out.insert_or_assign(e->agent, std::move(*e));
  }
  return out;
}

std::vector<CommandEntry> HttpLedgerClient::read_pending_commands(const AgentId& target, Timestamp now) {
  std::vector<CommandEntry> out;
  const auto path = "/v1/ledger/commands/pending?agent=" + url_encode(target.str()) + "&now=" + std::to_string(now);
  for (const auto& line : lines_of(api_.get(path))) {
    auto record = decode_line(line);
    if (auto* c = std::get_if<CommandEntry>(&record)) out.push_back(std::move(*c));
  }
  return out;
}

CommandEntry HttpLedgerClient::transition_command(std::string_view command_id, CommandState new_state,
                                                  std::optional<std::string> result_note) {
  json body = {{"schema", kApiSchemaVersion}, {"state", to_string(new_state)}};
  if (result_note) body["result_note"] = *result_note;
  const auto lines =
      lines_of(api_.post("/v1/ledger/commands/" + url_encode(command_id) + "/transition", body));
  if (lines.size() != 1) throw Error(ErrorCode::kMalformed, "transition reply must hold one record");
  auto record = decode_line(lines.front());
  if (!std::holds_alternative<CommandEntry>(record)) throw Error(ErrorCode::kMalformed, "transition reply is not a command");
  return std::get<CommandEntry>(record);
}

}  // namespace fleetwarden
