#include "fleetwarden/http/server.hpp"

#include "fleetwarden/core/error.hpp"
#include "fleetwarden/http/documents.hpp"
#include "fleetwarden/ledger/codec.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <filesystem>

namespace fleetwarden {

using nlohmann::json;

namespace {

constexpr std::string_view kPlaceholderIndex = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>fleetwarden</title></head>
<body><h1>fleetwarden controller</h1>
<p>The dashboard is not installed. Set <code>static_dir</code> in the controller config to serve it.
The API is under <code>/v1/</code>.</p></body></html>
)";

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void fail(httplib::Response& res, ErrorCode code, std::string_view message) {
  reply(res, http_status(code), error_document(code, message));
}

json body_of(const httplib::Request& req) {
  try {
    auto j = json::parse(req.body);
    if (!j.is_object()) throw Error(ErrorCode::kParse, "request body must be a JSON object");
    if (j.contains("schema") && j.at("schema") != kApiSchemaVersion) {
      throw Error(ErrorCode::kUnknownVersion, "unsupported schema version");
    }
    return j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("bad request body: ") + e.what());
  }
}

Record decode_or_throw(const std::string& line) {
  auto decoded = decode_record(line);
  if (!decoded.ok()) {
    const auto kind = decoded.error().kind;
    const auto code = kind == DecodeErrorKind::kUnknownType      ? ErrorCode::kUnknownType
                      : kind == DecodeErrorKind::kUnknownVersion ? ErrorCode::kUnknownVersion
                      : kind == DecodeErrorKind::kMalformed      ? ErrorCode::kMalformed
                                                                 : ErrorCode::kValidation;
    throw Error(code, decoded.error().message);
  }
  return decoded.record();
}

std::optional<Timestamp> int_param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  const auto text = req.get_param_value(name);
  try {
    std::size_t used = 0;
    const auto v = std::stoll(text, &used);
    if (used != text.size()) throw std::invalid_argument(name);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kInvalidArgument, std::string(name) + " must be an integer");
  }
}

}  // namespace

ApiServer::ApiServer(LineLedger& ledger, const Clock& clock, Controller* controller, std::string token,
                     std::string static_dir)
    : ledger_(ledger),
      clock_(clock),
      controller_(controller),
      token_(std::move(token)),
      static_dir_(std::move(static_dir)),
      server_(std::make_unique<httplib::Server>()) {
  routes();
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::kStorage, "cannot bind " + host);
    return bound;
  }
  if (!server_->bind_to_port(host, port)) {
    throw Error(ErrorCode::kStorage, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void ApiServer::start() {
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void ApiServer::run() { server_->listen_after_bind(); }

void ApiServer::stop() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

void ApiServer::routes() {
  auto& s = *server_;

  s.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
    if (req.path.rfind("/v1/", 0) != 0) return httplib::Server::HandlerResponse::Unhandled;
    if (req.get_header_value("Authorization") != "Bearer " + token_) {
      reply(res, 401, error_document(ErrorCode::kUnauthorized, "missing or invalid bearer token"));
      return httplib::Server::HandlerResponse::Handled;
    }
    return httplib::Server::HandlerResponse::Unhandled;
  });

  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const Error& e) {
      fail(res, e.code(), e.what());
    } catch (const std::exception& e) {
      spdlog::error("request failed: {}", e.what());
      reply(res, 500, error_document(ErrorCode::kStorage, e.what()));
    }
  });

  const auto principal = [](const httplib::Request& req) {
    if (!req.has_header("X-Fleet-Agent")) return Principal::controller();
    return Principal::agent_of(AgentId::parse(req.get_header_value("X-Fleet-Agent")));
  };

  // Ledger.
  const auto append_lines = [this, principal](const httplib::Request& req, httplib::Response& res) {
    const auto who = principal(req);
    std::size_t n = 0;
    for (const auto& line : lines_of(body_of(req))) {
      ledger_.append(decode_or_throw(line), who);
      ++n;
    }
    reply(res, 201, {{"schema", kApiSchemaVersion}, {"appended", n}});
  };
  s.Post("/v1/ledger/status", append_lines);
  s.Post("/v1/ledger/commands", append_lines);

  s.Get("/v1/ledger/status/latest", [this](const httplib::Request&, httplib::Response& res) {
    std::vector<std::string> lines;
    for (const auto& [_, e] : ledger_.read_latest_per_agent()) lines.push_back(encode_record(e));
    reply(res, 200, records_document(lines));
  });

  s.Get("/v1/ledger/commands/pending", [this, principal](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("agent")) throw Error(ErrorCode::kInvalidArgument, "agent parameter is required");
    const auto target = AgentId::parse(req.get_param_value("agent"));
    const auto now = int_param(req, "now").value_or(clock_.now());
    std::vector<std::string> lines;
    for (const auto& c : ledger_.read_pending_commands(target, now, principal(req))) lines.push_back(encode_record(c));
    reply(res, 200, records_document(lines));
  });

  s.Post(R"(/v1/ledger/commands/([^/]+)/transition)",
         [this, principal](const httplib::Request& req, httplib::Response& res) {
           const auto body = body_of(req);
           const auto state = parse_command_state(body.value("state", ""));
           if (!state) throw Error(ErrorCode::kInvalidArgument, "state must be EXECUTED, FAILED or EXPIRED");
           std::optional<std::string> note;
           if (body.contains("result_note") && !body.at("result_note").is_null()) {
             note = body.at("result_note").get<std::string>();
           }
           const auto updated = ledger_.transition_command(req.matches[1].str(), *state, note, principal(req));
           reply(res, 200, records_document({encode_record(updated)}));
         });

  // Static dashboard.
  if (!static_dir_.empty() && std::filesystem::is_directory(static_dir_)) {
    s.set_mount_point("/", static_dir_);
  } else {
    s.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(std::string(kPlaceholderIndex), "text/html");
    });
  }

  if (controller_ == nullptr) return;
  auto& c = *controller_;

  s.Get("/v1/fleet", [&c](const httplib::Request&, httplib::Response& res) { reply(res, 200, fleet_json(c.view())); });

  s.Post("/v1/machines", [&c](const httplib::Request& req, httplib::Response& res) {
    const auto body = body_of(req);
    const auto cls = parse_display_class(body.value("display_class", "OTHER"));
    if (!cls) throw Error(ErrorCode::kValidation, "display_class must be CRT, LCD or OTHER");
    std::optional<std::string> model;
    if (body.contains("power_model")) model = body.at("power_model").get<std::string>();
    const auto rec = c.register_machine(AgentId::parse(body.value("agent", "")), body.value("address", ""), *cls, model);
    json doc = machine_json(rec);
    doc["schema"] = kApiSchemaVersion;
    reply(res, 201, doc);
  });

  s.Get(R"(/v1/machines/([^/]+))", [&c](const httplib::Request& req, httplib::Response& res) {
    reply(res, 200, detail_json(c.detail(AgentId::parse(req.matches[1].str()))));
  });

  s.Post(R"(/v1/machines/([^/]+)/actions)", [&c](const httplib::Request& req, httplib::Response& res) {
    const auto body = body_of(req);
    const auto kind = parse_command_kind(body.value("kind", ""));
    if (!kind) throw Error(ErrorCode::kValidation, "kind must be SHUTDOWN, RESTART, LOGOFF or HIBERNATE");
    const auto cmd = c.issue_action(AgentId::parse(req.matches[1].str()), *kind);
    json doc = record_json(cmd);
    doc["schema"] = kApiSchemaVersion;
    reply(res, 201, doc);
  });

  s.Post(R"(/v1/machines/([^/]+)/quarantine)", [&c](const httplib::Request& req, httplib::Response& res) {
    const auto body = body_of(req);
    if (!body.contains("on") || !body.at("on").is_boolean()) throw Error(ErrorCode::kValidation, "on must be a boolean");
    json doc = machine_json(c.quarantine(AgentId::parse(req.matches[1].str()), body.at("on").get<bool>()));
    doc["schema"] = kApiSchemaVersion;
    reply(res, 200, doc);
  });

  s.Post("/v1/scan", [&c](const httplib::Request& req, httplib::Response& res) {
    const auto body = body_of(req);
    const auto range = body.value("range", "");
    reply(res, 200, {{"schema", kApiSchemaVersion}, {"range", range}, {"found", c.scan(range)}});
  });

  s.Get(R"(/v1/commands/([^/]+))", [&c](const httplib::Request& req, httplib::Response& res) {
    json doc = record_json(c.command(req.matches[1].str()));
    doc["schema"] = kApiSchemaVersion;
    reply(res, 200, doc);
  });

  s.Get("/v1/history", [&c](const httplib::Request& req, httplib::Response& res) {
    HistoryFilter f;
    if (req.has_param("agent")) f.agent = AgentId::parse(req.get_param_value("agent"));
    if (req.has_param("kind")) {
      f.kind = parse_event_kind(req.get_param_value("kind"));
      if (!f.kind) throw Error(ErrorCode::kInvalidArgument, "unknown event kind");
    }
    f.since = int_param(req, "since");
    f.until = int_param(req, "until");
    json events = json::array();
    for (const auto& e : c.history(f)) events.push_back(event_json(e));
    reply(res, 200, {{"schema", kApiSchemaVersion}, {"events", events}});
  });

  s.Get("/v1/energy", [&c](const httplib::Request& req, httplib::Response& res) {
    const auto now = c.clock().now();
    const auto since = int_param(req, "since").value_or(0);
    const auto until = int_param(req, "until").value_or(now);
    reply(res, 200, energy_json(c.energy_report(since, until)));
  });
}

}  // namespace fleetwarden
