#include "fleetwarden/agent/agent.hpp"
#include "fleetwarden/agent/trace.hpp"
#include "fleetwarden/core/error.hpp"
#include "fleetwarden/http/client.hpp"
#include "fleetwarden/http/documents.hpp"
#include "fleetwarden/http/server.hpp"

#include <doctest.h>
#include <httplib.h>

using namespace fleetwarden;
using nlohmann::json;

namespace {

constexpr Timestamp kStart = 1704067200;

struct Stack {
  FakeClock clock{kStart};
  MemoryLineStore store;
  LineLedger ledger{store};
  MemoryEventStore events;
  FixtureProber prober{{"10.0.0.5"}};
  IdGenerator ids{9};
  Controller controller{ControllerConfig{}, clock, ledger, events, prober, ids};
  ApiServer server{ledger, clock, &controller, "s3cret"};
  int port = server.bind("127.0.0.1", 0);
  std::string endpoint = "http://127.0.0.1:" + std::to_string(port);

  Stack() { server.start(); }
};

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kValidation;
}

}  // namespace

TEST_CASE("admin API and agent over HTTP") {
  Stack s;
  ApiClient admin(s.endpoint, "s3cret");

  auto rec = admin.post("/v1/machines", {{"agent", "lab1-pc07"}, {"address", "10.0.0.7"}, {"display_class", "LCD"}});
  CHECK(rec["schema"] == 1);
  CHECK(rec["quarantined"] == false);
  CHECK(code_of([&] { admin.post("/v1/machines", {{"agent", "lab1-pc07"}, {"address", "10.0.0.7"}}); }) ==
        ErrorCode::kAlreadyExists);

  // Agent in HTTP mode.
  const auto agent_id = AgentId::parse("lab1-pc07");
  HttpLedgerClient ledger(s.endpoint, "s3cret", agent_id);
  ActivityTrace trace = ActivityTrace::parse("0 input\n0 proc editor 40\n");
  ScriptedSources sources(trace, s.clock, kStart);
  SimulatedPlatform platform(s.clock);
  MemoryDedupeJournal journal;
  AgentConfig config{.agent_id = agent_id};
  config.ledger_mode = LedgerMode::kHttp;
  config.endpoint = s.endpoint;
  Agent agent(config, s.clock, sources.sources(), ledger, platform, journal, kStart);
  agent.heartbeat_tick();
  s.clock.advance(5);
  agent.heartbeat_tick();

  auto fleet = admin.get("/v1/fleet");
  REQUIRE(fleet["rows"].size() == 1);
  CHECK(fleet["rows"][0]["liveness"] == "ACTIVE");
  CHECK(fleet["rows"][0]["seq"] == 1);

  auto cmd = admin.post("/v1/machines/lab1-pc07/actions", {{"kind", "SHUTDOWN"}});
  CHECK(cmd["state"] == "PENDING");
  CHECK(cmd["expires_at"].get<Timestamp>() == cmd["issued_at"].get<Timestamp>() + 300);
  const auto id = cmd["command_id"].get<std::string>();

  CHECK(agent.poll_and_execute() == std::vector<std::string>{id});
  CHECK(platform.count(id) == 1);
  CHECK(admin.get("/v1/commands/" + id)["state"] == "EXECUTED");
  CHECK(admin.get("/v1/machines/lab1-pc07")["commands"].size() == 1);

  CHECK(admin.post("/v1/machines/lab1-pc07/quarantine", {{"on", true}})["quarantined"] == true);
  CHECK(admin.post("/v1/scan", {{"range", "10.0.0.0/29"}})["found"] == json::array({"10.0.0.5"}));
  CHECK(admin.get("/v1/history?kind=COMMAND_ISSUED")["events"].size() == 1);
  CHECK(admin.get("/v1/history?agent=lab1-pc07")["events"].size() >= 3);
  CHECK(admin.get("/v1/energy")["schema"] == 1);

  CHECK(code_of([&] { admin.get("/v1/machines/ghost"); }) == ErrorCode::kNotFound);
  CHECK(code_of([&] { admin.get("/v1/commands/nope"); }) == ErrorCode::kNotFound);
  CHECK(code_of([&] { admin.post("/v1/machines/lab1-pc07/actions", {{"kind", "DANCE"}}); }) ==
        ErrorCode::kValidation);
  CHECK(code_of([&] { admin.post("/v1/scan", {{"range", "x"}}); }) == ErrorCode::kParse);
  CHECK(code_of([&] { admin.get("/v1/history?since=5&until=1"); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([&] { admin.post("/v1/scan", {{"schema", 2}, {"range", "10.0.0.1"}}); }) ==
        ErrorCode::kUnknownVersion);
}

TEST_CASE("authentication and authorization") {
  Stack s;
  ApiClient wrong(s.endpoint, "guess");
  CHECK(code_of([&] { wrong.get("/v1/fleet"); }) == ErrorCode::kUnauthorized);

  httplib::Client raw(s.endpoint);
  auto res = raw.Get("/v1/fleet");
  REQUIRE(res);
  CHECK(res->status == 401);
  res = raw.Get("/");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->body.find("fleetwarden") != std::string::npos);

  // An agent may not write another agent's heartbeats or issue commands.
  HttpLedgerClient mallory(s.endpoint, "s3cret", AgentId::parse("mallory"));
  StatusEntry forged{.agent = AgentId::parse("victim")};
  CHECK(code_of([&] { mallory.append(forged); }) == ErrorCode::kUnauthorized);
  CommandEntry cmd{.command_id = "c1",
                   .target = AgentId::parse("victim"),
                   .kind = CommandKind::kShutdown,
                   .issued_at = kStart,
                   .expires_at = kStart + 300};
  CHECK(code_of([&] { mallory.append(cmd); }) == ErrorCode::kUnauthorized);

  HttpLedgerClient controller(s.endpoint, "s3cret", std::nullopt);
  controller.append(cmd);
  HttpLedgerClient victim(s.endpoint, "s3cret", AgentId::parse("victim"));
  CHECK(victim.read_pending_commands(AgentId::parse("victim"), kStart).size() == 1);
  CHECK(code_of([&] { mallory.transition_command("c1", CommandState::kExecuted, std::nullopt); }) ==
        ErrorCode::kUnauthorized);
  CHECK(victim.transition_command("c1", CommandState::kExecuted, "done").state == CommandState::kExecuted);
  CHECK(code_of([&] { victim.transition_command("c1", CommandState::kFailed, std::nullopt); }) ==
        ErrorCode::kLifecycle);
  CHECK(code_of([&] { victim.transition_command("zzz", CommandState::kFailed, std::nullopt); }) ==
        ErrorCode::kNotFound);

  // Malformed ledger documents.
  ApiClient agent_api(s.endpoint, "s3cret", AgentId::parse("victim"));
  CHECK(code_of([&] { agent_api.post("/v1/ledger/status", {{"schema", 1}, {"records", {"not json"}}}); }) ==
        ErrorCode::kMalformed);
  CHECK(code_of([&] { agent_api.post("/v1/ledger/status", {{"schema", 1}}); }) == ErrorCode::kParse);
}

TEST_CASE("unreachable controller buffers heartbeats") {
  FakeClock clock(kStart);
  HttpLedgerClient ledger("http://127.0.0.1:1", "s3cret", AgentId::parse("pc"), std::chrono::milliseconds(200));
  ActivityTrace trace;
  ScriptedSources sources(trace, clock, kStart);
  SimulatedPlatform platform(clock);
  MemoryDedupeJournal journal;
  AgentConfig config{.agent_id = AgentId::parse("pc")};
  config.ledger_mode = LedgerMode::kHttp;
  config.endpoint = "http://127.0.0.1:1";
  Agent agent(config, clock, sources.sources(), ledger, platform, journal, kStart);
  agent.heartbeat_tick();
  agent.heartbeat_tick();
  CHECK(agent.buffered() == 2);
  CHECK(code_of([&] { ledger.read_latest_per_agent(); }) == ErrorCode::kTransportUnavailable);
}
