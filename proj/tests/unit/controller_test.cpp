#include "fleetwarden/controller/controller.hpp"
#include "fleetwarden/core/error.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <random>

using namespace fleetwarden;
namespace fs = std::filesystem;

namespace {

constexpr Timestamp kStart = 1704067200 + 12 * 3600;  // a Monday, noon UTC

struct Fixture {
  FakeClock clock{kStart};
  MemoryLineStore store;
  LineLedger ledger{store};
  MemoryEventStore events;
  FixtureProber prober{{"10.0.0.2", "10.0.0.3"}};
  IdGenerator ids{1};
  ControllerConfig config = [] {
    ControllerConfig c;
    c.watchlist = {"cryptominer*"};
    c.policy.idle_action = CommandKind::kLogoff;
    c.policy.utc_offset_seconds = 0;
    c.policy.work_hours = WeeklySchedule::parse("Mon-Fri 08:00-18:00");
    return c;
  }();
  std::unique_ptr<Controller> controller = std::make_unique<Controller>(config, clock, ledger, events, prober, ids);

  void beat(std::string_view agent, std::uint64_t seq, std::int64_t idle, std::vector<ProcessInfo> procs = {},
            Timestamp boot = kStart - 100000) {
    StatusEntry e{.agent = AgentId::parse(agent)};
    e.boot = boot;
    e.seq = seq;
    e.timestamp = clock.now();
    e.idle_seconds = idle;
    e.status = idle >= 600 ? Status::kIdle : Status::kBusy;
    e.processes = std::move(procs);
    ledger.append(e, Principal::agent_of(e.agent));
  }
};

AgentId id(std::string_view s) { return AgentId::parse(s); }

}  // namespace

TEST_CASE("registration and admin actions") {
  Fixture f;
  const auto rec = f.controller->register_machine(id("lab1-pc07"), "10.0.0.7", DisplayClass::kLcd);
  CHECK_FALSE(rec.quarantined);
  CHECK(rec.registered_at == kStart);
  CHECK_THROWS_AS(f.controller->register_machine(id("lab1-pc07"), "10.0.0.8", DisplayClass::kLcd), Error);
  CHECK_THROWS_AS(f.controller->register_machine(id("x"), "10.0.0.8", DisplayClass::kLcd, "plasma"), Error);

  const auto cmd = f.controller->issue_action(id("lab1-pc07"), CommandKind::kShutdown);
  CHECK(cmd.state == CommandState::kPending);
  CHECK(cmd.expires_at == cmd.issued_at + 300);
  const auto again = f.controller->issue_action(id("lab1-pc07"), CommandKind::kRestart);
  CHECK(again.command_id != cmd.command_id);

  const auto before = f.ledger.commands().size();
  try {
    f.controller->issue_action(id("ghost"), CommandKind::kShutdown);
    FAIL("expected not found");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNotFound);
  }
  CHECK(f.ledger.commands().size() == before);

  CHECK(f.controller->quarantine(id("lab1-pc07"), true).quarantined);
  CHECK_NOTHROW(f.controller->issue_action(id("lab1-pc07"), CommandKind::kRestart));  // admin still allowed
  CHECK_THROWS_AS(f.controller->quarantine(id("ghost"), true), Error);

  CHECK(f.controller->command(cmd.command_id) == cmd);
  CHECK_THROWS_AS(f.controller->command("nope"), Error);
  CHECK(f.controller->detail(id("lab1-pc07")).commands.size() == 3);
  CHECK_THROWS_AS(f.controller->detail(id("ghost")), Error);

  CHECK(f.controller->scan("10.0.0.0/29") == std::vector<std::string>{"10.0.0.2", "10.0.0.3"});
  CHECK_THROWS_AS(f.controller->scan("nonsense"), Error);

  const auto issued = f.controller->history({.kind = EventKind::kCommandIssued});
  CHECK(issued.size() == 3);
  CHECK(f.controller->history({.kind = EventKind::kScanCompleted}).size() == 1);
}

TEST_CASE("view, liveness and suspicious flags") {
  Fixture f;
  f.controller->register_machine(id("a"), "10.0.0.2", DisplayClass::kCrt);
  f.controller->register_machine(id("b"), "10.0.0.3", DisplayClass::kLcd);
  f.beat("a", 1, 0, {{"CryptoMiner.exe", 4, 10}});
  f.clock.advance(10);
  const auto tick = f.controller->tick();
  CHECK(tick.records == 1);
  const auto view = f.controller->view();
  REQUIRE(view.rows.size() == 2);
  CHECK(view.rows[0].liveness == Liveness::kActive);
  CHECK(view.rows[0].suspicious == std::vector<std::string>{"CryptoMiner.exe"});
  CHECK(view.rows[1].liveness == Liveness::kOffline);
  CHECK(f.controller->history({.kind = EventKind::kSuspiciousFlagged}).size() == 1);
  f.controller->tick();
  CHECK(f.controller->history({.kind = EventKind::kSuspiciousFlagged}).size() == 1);  // unchanged set
  CHECK(f.controller->registry().find(id("a"))->last_seen == kStart);
}

TEST_CASE("policy issues once and respects quarantine") {
  Fixture f;
  f.controller->register_machine(id("a"), "10.0.0.2", DisplayClass::kCrt);
  f.controller->register_machine(id("q"), "10.0.0.3", DisplayClass::kCrt);
  f.controller->quarantine(id("q"), true);
  f.beat("a", 1, 700);
  f.beat("q", 1, 700);
  auto report = f.controller->tick();
  REQUIRE(report.issued.size() == 1);
  CHECK(report.issued[0].target == id("a"));
  CHECK(report.issued[0].kind == CommandKind::kLogoff);

  // Still pending: nothing new.
  f.clock.advance(5);
  f.beat("a", 2, 705);
  CHECK(f.controller->tick().issued.empty());

  // Executed: still suppressed for this idle episode.
  f.ledger.transition_command(report.issued[0].command_id, CommandState::kExecuted, "ok", Principal::agent_of(id("a")));
  f.clock.advance(5);
  f.beat("a", 3, 710);
  CHECK(f.controller->tick().issued.empty());
  CHECK(f.controller->history({.kind = EventKind::kCommandTransitioned}).size() == 1);

  // New input, then idle again: a fresh episode.
  f.clock.advance(700);
  f.beat("a", 4, 650);
  CHECK(f.controller->tick().issued.size() == 1);
}

TEST_CASE("expiry is observed and persisted") {
  Fixture f;
  f.controller->register_machine(id("a"), "10.0.0.2", DisplayClass::kCrt);
  const auto cmd = f.controller->issue_action(id("a"), CommandKind::kShutdown);
  f.clock.advance(299);
  CHECK(f.controller->tick().expired.empty());
  f.clock.advance(1);
  const auto report = f.controller->tick();
  REQUIRE(report.expired.size() == 1);
  CHECK(report.expired[0].result_note == std::string(kExpiredNote));
  CHECK(f.controller->command(cmd.command_id).state == CommandState::kExpired);
  CHECK(replay(f.events).open_commands.empty());
}

TEST_CASE("summaries and the energy report") {
  Fixture f;
  f.controller->register_machine(id("a"), "10.0.0.2", DisplayClass::kCrt);
  // Heartbeat every 30 s for 20 minutes, ticks every 5 s.
  std::uint64_t seq = 0;
  for (int t = 0; t <= 1200; t += 5) {
    if (t % 30 == 0) f.beat("a", seq++, 0);
    f.controller->tick();
    f.clock.advance(5);
  }
  const auto summaries = f.controller->history({.kind = EventKind::kHeartbeatSummary});
  CHECK(summaries.size() == 4);
  const auto report = f.controller->energy_report(kStart, kStart + 1200);
  REQUIRE(report.rows.size() == 1);
  // kStart is period-aligned; all four periods are fully ACTIVE at 210 W.
  CHECK(format_wh(report.actual) == "70.0");
  CHECK(report.baseline == report.actual);
  CHECK_THROWS_AS(f.controller->energy_report(10, 5), Error);
}

TEST_CASE("restart restores state from the event log") {
  Fixture f;
  f.controller->register_machine(id("a"), "10.0.0.2", DisplayClass::kCrt);
  f.controller->quarantine(id("a"), true);
  const auto cmd = f.controller->issue_action(id("a"), CommandKind::kRestart);
  f.controller.reset();
  // Transition while the controller is down.
  f.ledger.transition_command(cmd.command_id, CommandState::kExecuted, "ok", Principal::agent_of(id("a")));

  Controller restarted(f.config, f.clock, f.ledger, f.events, f.prober, f.ids);
  const auto rec = restarted.registry().find(id("a"));
  REQUIRE(rec);
  CHECK(rec->quarantined);
  CHECK(f.events.events().size() == 4);  // registered, quarantine, issued, transitioned
  CHECK(replay(f.events).open_commands.empty());
}

TEST_CASE("config file") {
  const auto dir = fs::temp_directory_path() / ("fw-ctl-" + std::to_string(std::random_device{}()));
  fs::create_directories(dir);
  {
    std::ofstream(dir / "watch.txt") << "# comment\ncryptominer*\n\n*virus*\n";
    std::ofstream(dir / "policy.json") << R"({"idle_action":"LOGOFF","work_hours":"Mon-Fri 08:00-18:00"})";
    std::ofstream(dir / "controller.json")
        << R"({"watchlist_path":"watch.txt","policy_path":"policy.json","data_dir":"data","auth_token":"s3cret"})";
  }
  const auto config = load_controller_config((dir / "controller.json").string());
  CHECK(config.watchlist == std::vector<std::string>{"cryptominer*", "*virus*"});
  CHECK(config.policy.idle_action == CommandKind::kLogoff);
  CHECK(config.data_dir == (dir / "data").string());
  CHECK(config.windows().stale_seconds == 90);
  CHECK(config.windows().offline_seconds == 300);
  CHECK_THROWS_AS(controller_config_from_json(nlohmann::json::parse(R"({"stale_multiplier":10})")), Error);
  fs::remove_all(dir);
}
