#include "fleetwarden/core/error.hpp"
#include "fleetwarden/ledger/codec.hpp"
#include "fleetwarden/persistence/event_store.hpp"
#include "fleetwarden/sim/sim.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <map>

using namespace fleetwarden;

namespace {

// The crash trials log every refused command.
const bool quiet = (spdlog::set_level(spdlog::level::off), true);

std::vector<FleetEvent> events_of(const Trace& trace) {
  std::vector<FleetEvent> out;
  for (const auto& r : trace.records) {
    if (r.source == "event") out.push_back(decode_event(r.line));
  }
  return out;
}

std::vector<TraceRecord> admin_lines(const Trace& trace, std::string_view prefix) {
  std::vector<TraceRecord> out;
  for (const auto& r : trace.records) {
    if (r.source == "admin" && r.line.rfind(prefix, 0) == 0) out.push_back(r);
  }
  return out;
}

MachineSpec machine(const std::string& id, const std::string& address, const std::string& trace) {
  MachineSpec m{.agent = AgentId::parse(id)};
  m.address = address;
  m.display_class = DisplayClass::kLcd;
  m.trace = ActivityTrace::parse(trace);
  return m;
}

}  // namespace

TEST_CASE("empty scenario gives an empty trace") {
  Scenario s;
  const auto result = run_scenario(s);
  CHECK(result.trace.records.empty());
  CHECK(result.trace.format().empty());
}

TEST_CASE("walk-through scenario matches the eight steps in order") {
  const auto scenario = sequence_scenario();
  const auto result = run_scenario(scenario);
  const auto steps = shutdown_walkthrough(AgentId::parse("pc-02"));
  const auto match = assert_sequence(result.trace, steps);
  CHECK_MESSAGE(match.ok, match.first_unmatched);
  CHECK(match.matched == 8);

  const auto acks = admin_lines(result.trace, "ack ");
  REQUIRE(acks.size() == 2);
  CHECK(acks[0].line.ends_with("EXECUTED AWAITING"));
  CHECK(acks[1].line.ends_with("EXECUTED ACKNOWLEDGED"));

  // The other machines keep running.
  CHECK(result.final_view.find(AgentId::parse("pc-01"))->liveness == Liveness::kActive);
  CHECK(result.final_view.find(AgentId::parse("pc-02"))->liveness != Liveness::kActive);
}

TEST_CASE("assert_sequence is order sensitive and vacuous on no steps") {
  const auto result = run_scenario(sequence_scenario());
  auto steps = shutdown_walkthrough(AgentId::parse("pc-02"));
  CHECK(assert_sequence(result.trace, {}).ok);

  std::swap(steps[4], steps[6]);  // acknowledgement before issuance
  const auto match = assert_sequence(result.trace, steps);
  CHECK_FALSE(match.ok);
  // The swapped-in acknowledgement matches, so the execution after it is the first miss.
  CHECK(match.first_unmatched == "agent-side execution");

  // A different machine never went through the walk-through.
  CHECK_FALSE(assert_sequence(result.trace, shutdown_walkthrough(AgentId::parse("pc-01"))).ok);
}

TEST_CASE("runs are deterministic and causally ordered") {
  const auto scenario = sequence_scenario(11);
  const auto a = run_scenario(scenario);
  const auto b = run_scenario(scenario);
  CHECK(a.trace.format() == b.trace.format());

  for (std::size_t i = 1; i < a.trace.records.size(); ++i) {
    CHECK(a.trace.records[i - 1].at <= a.trace.records[i].at);
  }
  // A different seed staggers the machines differently.
  CHECK(run_scenario(sequence_scenario(12)).trace.format() != a.trace.format());
}

TEST_CASE("every issued command has exactly one terminal transition") {
  auto scenario = sequence_scenario();
  // A command to a machine that is off never gets executed and must expire.
  scenario.machines[2].power_on_at = 250;
  scenario.timeline.push_back({.at = 200, .kind = AdminKind::kIssue, .agent = AgentId::parse("pc-03"),
                               .command = CommandKind::kLogoff});
  scenario.command_expiry_seconds = 30;
  const auto result = run_scenario(scenario);

  std::map<std::string, int> issued, terminal;
  for (const auto& e : events_of(result.trace)) {
    if (e.kind == EventKind::kCommandIssued) ++issued[command_from_event(e).command_id];
    if (e.kind == EventKind::kCommandTransitioned) ++terminal[command_from_event(e).command_id];
  }
  REQUIRE(issued.size() == 2);
  for (const auto& [id, n] : issued) {
    CHECK(n == 1);
    CHECK(terminal[id] == 1);
  }
  for (const auto& c : result.commands) CHECK(is_terminal(c.state));
  const auto logoff = std::find_if(result.commands.begin(), result.commands.end(),
                                   [](const CommandEntry& c) { return c.kind == CommandKind::kLogoff; });
  REQUIRE(logoff != result.commands.end());
  CHECK(logoff->state == CommandState::kExpired);
}

TEST_CASE("executed shutdown keeps the machine out of the active set") {
  const auto result = run_scenario(sequence_scenario());
  const auto target = AgentId::parse("pc-02");
  Timestamp executed_at = 0;
  for (const auto& inv : result.invocations) {
    if (inv.kind == CommandKind::kShutdown) executed_at = inv.at;
  }
  REQUIRE(executed_at > 0);
  for (const auto& view : admin_lines(result.trace, "view ")) {
    if (view.at >= executed_at + 90) CHECK(view.line.find("active=pc-01,pc-03 ") != std::string::npos);
  }
}

TEST_CASE("restart brings the machine back with a newer boot") {
  auto scenario = sequence_scenario();
  scenario.timeline = {{.at = 0, .kind = AdminKind::kStartup},
                       {.at = 40, .kind = AdminKind::kIssue, .agent = AgentId::parse("pc-01"),
                        .command = CommandKind::kRestart},
                       {.at = 150, .kind = AdminKind::kAck, .agent = AgentId::parse("pc-01")}};
  const auto result = run_scenario(scenario);
  const auto acks = admin_lines(result.trace, "ack ");
  REQUIRE(acks.size() == 1);
  CHECK(acks[0].line.ends_with("EXECUTED ACKNOWLEDGED"));
  const auto* row = result.final_view.find(AgentId::parse("pc-01"));
  REQUIRE(row->latest);
  CHECK(row->latest->boot > scenario.start + 40);
  CHECK(row->liveness == Liveness::kActive);
}

TEST_CASE("hibernated machine wakes on input") {
  Scenario s;
  s.duration_seconds = 400;
  s.policy.enabled = false;
  s.machines.push_back(machine("pc-h", "10.0.0.9", "0 input\n300 input\n"));
  s.timeline = {{.at = 20, .kind = AdminKind::kIssue, .agent = AgentId::parse("pc-h"),
                 .command = CommandKind::kHibernate}};
  const auto result = run_scenario(s);
  REQUIRE(result.invocations.size() == 1);
  const auto* row = result.final_view.find(AgentId::parse("pc-h"));
  REQUIRE(row->latest);
  CHECK(row->latest->boot == s.start + 300);
  CHECK(row->liveness == Liveness::kActive);
}

TEST_CASE("idle policy logs off only the idle machine, once") {
  Scenario s;
  s.duration_seconds = 1800;
  s.policy.idle_action = CommandKind::kLogoff;
  std::string busy;
  for (int t = 0; t <= 1800; t += 60) busy += std::to_string(t) + " input\n";
  s.machines.push_back(machine("busy", "10.0.0.1", busy));
  s.machines.push_back(machine("idle", "10.0.0.2", "0 input\n100 input\n"));
  const auto result = run_scenario(s);
  REQUIRE(result.invocations.size() == 1);
  CHECK(result.invocations[0].kind == CommandKind::kLogoff);
  CHECK(result.invocation_agents.at(result.invocations[0].command_id) == AgentId::parse("idle"));
  // Idle for 700 s at the earliest; the first IDLE heartbeat triggers it.
  CHECK(result.invocations[0].at >= s.start + 700);
}

TEST_CASE("suspicious scenario flags exactly the scripted machines") {
  const auto s = suspicious_scenario(3, 5);
  const auto result = run_scenario(s);
  const auto flagged = std::count_if(result.final_view.rows.begin(), result.final_view.rows.end(),
                                     [](const FleetRow& r) { return !r.suspicious.empty(); });
  CHECK(flagged == 5);
  CHECK(result.final_view.rows.size() == 180);
}

TEST_CASE("scenario JSON roundtrip reproduces the same run") {
  const auto original = sequence_scenario();
  const auto doc = scenario_to_json(original);
  const auto copy = scenario_from_json(nlohmann::json::parse(doc.dump()));
  CHECK(run_scenario(copy).trace.format() == run_scenario(original).trace.format());

  const auto lab = lab_scenario();
  CHECK(scenario_to_json(scenario_from_json(scenario_to_json(lab))) == scenario_to_json(lab));
}

TEST_CASE("scenario validation") {
  auto s = sequence_scenario();
  s.machines.push_back(s.machines.front());
  CHECK_THROWS_AS(s.validate(), Error);

  s = sequence_scenario();
  s.timeline.push_back({.at = 5, .kind = AdminKind::kView});
  CHECK_THROWS_AS(s.validate(), Error);  // out of order

  s = sequence_scenario();
  s.timeline.push_back({.at = 299, .kind = AdminKind::kDetail, .agent = AgentId::parse("nobody")});
  CHECK_THROWS_AS(s.validate(), Error);

  s = sequence_scenario();
  s.machines[0].address = "10.0.0.300";
  CHECK_THROWS_AS(s.validate(), Error);

  CHECK_THROWS_AS(scenario_from_json(nlohmann::json::parse(R"({"timeline":[{"at":0,"action":"dance"}]})")), Error);
  CHECK_THROWS_AS(scenario_from_json(nlohmann::json::array()), Error);
}

TEST_CASE("admin errors are reported in the trace, not thrown") {
  auto s = sequence_scenario();
  s.timeline = {{.at = 1, .kind = AdminKind::kScan, .range = "not-a-range"},
                {.at = 2, .kind = AdminKind::kAck, .agent = AgentId::parse("pc-01")}};
  const auto result = run_scenario(s);
  CHECK(admin_lines(result.trace, "scan ")[0].line == "scan not-a-range error=parse");
  CHECK(admin_lines(result.trace, "ack ")[0].line == "ack pc-01 none");
}

TEST_CASE("crash trials never double-execute") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto r = run_crash_trial(seed);
    CHECK_MESSAGE(r.violations.empty(), "seed ", seed, ": ", (r.violations.empty() ? "" : r.violations.front()));
    CHECK(r.executed + r.failed + r.expired == r.commands);
  }
}
