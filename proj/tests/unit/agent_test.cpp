#include "fleetwarden/agent/agent.hpp"
#include "fleetwarden/agent/trace.hpp"
#include "fleetwarden/core/error.hpp"
#include "fleetwarden/ledger/flaky_ledger.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <unistd.h>
#include <filesystem>
#include <random>

using namespace fleetwarden;
namespace fs = std::filesystem;

namespace {

struct FixedInput final : InputSource {
  std::optional<Timestamp> value;
  std::optional<Timestamp> last_input_at() override { return value; }
};

struct FixtureProcesses final : ProcessSource {
  std::optional<std::vector<ProcessInfo>> value = std::vector<ProcessInfo>{};
  std::optional<std::vector<ProcessInfo>> processes() override { return value; }
};

struct FixtureCounters final : CounterSource {
  std::optional<TrafficCounters> value = TrafficCounters{};
  std::optional<TrafficCounters> counters() override { return value; }
};

AgentConfig config_for(std::string_view id, std::int64_t threshold = 600) {
  AgentConfig c{.agent_id = AgentId::parse(id)};
  c.idle_threshold_seconds = threshold;
  c.ledger_root = "unused";
  return c;
}

CommandEntry pending(std::string id, std::string_view target, CommandKind kind, Timestamp issued = 1000) {
  return CommandEntry{.command_id = std::move(id),
                      .target = AgentId::parse(target),
                      .kind = kind,
                      .issued_at = issued,
                      .expires_at = issued + kDefaultCommandExpirySeconds,
                      .state = CommandState::kPending,
                      .result_note = std::nullopt};
}

struct Rig {
  FakeClock clock{1000};
  FixedInput input;
  FixtureProcesses procs;
  FixtureCounters counters;
  MemoryLineStore store;
  LineLedger ledger{store};
  LocalLedgerClient client;
  FlakyLedger flaky{client};
  SimulatedPlatform platform{clock};
  MemoryDedupeJournal journal;

  explicit Rig(std::string_view id = "pc-01") : client(ledger, Principal::agent_of(AgentId::parse(id))) {
    input.value = 1000;
  }
  Agent make(std::string_view id = "pc-01", std::int64_t threshold = 600) {
    return Agent(config_for(id, threshold), clock, AgentSources{input, procs, counters}, flaky, platform, journal,
                 clock.now());
  }
  void issue(const CommandEntry& c) { ledger.append(c, Principal::controller()); }
};

struct SimulatedCrash {};

}  // namespace

TEST_CASE("sample_activity computes clamped idle time") {
  FixedInput input;
  input.value = 1000;
  CHECK(sample_activity(1000, input).idle_seconds == 0);
  CHECK(sample_activity(1600, input).idle_seconds == 1600 - 1000);
  input.value = 1005;
  auto skew = sample_activity(1000, input);
  CHECK(skew.idle_seconds == 0);
  CHECK_FALSE(skew.degraded);
  input.value.reset();
  auto blind = sample_activity(5000, input);
  CHECK(blind.idle_seconds == 0);
  CHECK(blind.degraded);
}

TEST_CASE("determine_status boundary and monotonicity") {
  CHECK(determine_status(0, 600) == Status::kBusy);
  CHECK(determine_status(600, 600) == Status::kIdle);
  CHECK(determine_status(3599, 3600) == Status::kBusy);
  static_assert(determine_status(612, 600) == Status::kIdle);
  for (std::int64_t threshold : {60, 600, 1200, 3600}) {
    bool idle_seen = false;
    for (std::int64_t e = 0; e <= 4000; ++e) {
      const bool idle = determine_status(e, threshold) == Status::kIdle;
      CHECK_FALSE((idle_seen && !idle));
      idle_seen = idle_seen || idle;
    }
  }
}

TEST_CASE("sample_processes normalizes the process table") {
  FixtureProcesses source;
  source.value = std::vector<ProcessInfo>{{"editor", 40, 100}, {"calc", 12, 50}};
  auto s = sample_processes(source);
  REQUIRE(s.processes.size() == 2);
  CHECK(s.processes[0].name == "calc");
  CHECK(s.processes[1].name == "editor");

  // Dedupe oracle: keep the first entry seen for each pid.
  source.value = std::vector<ProcessInfo>{{"zeta", 7, 1}, {"alpha", 7, 2}, {"beta", 8, 3}};
  s = sample_processes(source);
  REQUIRE(s.processes.size() == 2);
  CHECK(s.processes[0] == ProcessInfo{"beta", 8, 3});
  CHECK(s.processes[1] == ProcessInfo{"zeta", 7, 1});

  source.value = std::vector<ProcessInfo>{};
  CHECK(sample_processes(source).processes.empty());

  std::vector<ProcessInfo> many;
  for (int i = 1; i <= 400; ++i) many.push_back({"p" + std::to_string(1000 + i), i, 0});
  source.value = many;
  s = sample_processes(source);
  CHECK(s.processes.size() == kMaxReportedProcesses);
  CHECK(s.processes.front().name == "p1001");

  source.value.reset();
  s = sample_processes(source);
  CHECK(s.processes.empty());
  CHECK(s.degraded);
}

TEST_CASE("traffic sampler detects resets and repeats on failure") {
  FixtureCounters source;
  TrafficSampler sampler;
  source.value = TrafficCounters{1000, 10, 1, 1};
  auto first = sampler.sample(source);
  CHECK(first.counters.rx_bytes == 1000);
  CHECK_FALSE(first.reset);
  source.value = TrafficCounters{1500, 20, 2, 2};
  CHECK(sampler.sample(source).counters.rx_bytes == 1500);
  source.value = TrafficCounters{200, 20, 2, 2};
  auto reset = sampler.sample(source);
  CHECK(reset.counters.rx_bytes == 200);
  CHECK(reset.reset);
  source.value.reset();
  auto failed = sampler.sample(source);
  CHECK(failed.degraded);
  CHECK(failed.counters.rx_bytes == 200);
}

TEST_CASE("heartbeat ticks sequence and status") {
  Rig rig;
  auto agent = rig.make();
  auto a = agent.heartbeat_tick();
  rig.clock.advance(30);
  auto b = agent.heartbeat_tick();
  CHECK(a.seq == 0);
  CHECK(b.seq == a.seq + 1);
  CHECK(b.boot == a.boot);

  rig.input.value = rig.clock.now() - 612;
  auto idle = agent.heartbeat_tick();
  CHECK(idle.idle_seconds == 612);
  CHECK(idle.status == determine_status(612, 600));
  CHECK(idle.status == Status::kIdle);
  CHECK(rig.ledger.read_latest_per_agent().at(AgentId::parse("pc-01")) == idle);
}

TEST_CASE("degraded input reports BUSY") {
  Rig rig;
  auto agent = rig.make();
  rig.input.value.reset();
  rig.clock.advance(10'000);
  auto e = agent.heartbeat_tick();
  CHECK(e.status == Status::kBusy);
  CHECK(e.degraded);
}

TEST_CASE("heartbeats buffer while the ledger is down") {
  Rig rig;
  auto agent = rig.make();
  rig.flaky.set_available(false);
  for (int i = 0; i < 3; ++i) {
    agent.heartbeat_tick();
    rig.clock.advance(30);
  }
  CHECK(agent.buffered() == 3);
  rig.flaky.set_available(true);
  agent.heartbeat_tick();
  CHECK(agent.buffered() == 0);

  LedgerCursor cursor;
  auto batch = rig.ledger.read(cursor);
  REQUIRE(batch.records.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::get<StatusEntry>(batch.records[i]).seq == i);
}

TEST_CASE("heartbeat buffer drops the oldest beyond its bound") {
  Rig rig;
  auto agent = rig.make();
  rig.flaky.set_available(false);
  for (int i = 0; i < 130; ++i) agent.heartbeat_tick();
  CHECK(agent.buffered() == Agent::kMaxBufferedEntries);
  rig.flaky.set_available(true);
  agent.heartbeat_tick();
  LedgerCursor cursor;
  auto batch = rig.ledger.read(cursor);
  REQUIRE(batch.records.size() == Agent::kMaxBufferedEntries);
  CHECK(std::get<StatusEntry>(batch.records.front()).seq == 31);
  CHECK(std::get<StatusEntry>(batch.records.back()).seq == 130);
}

TEST_CASE("first IDLE tick matches brute-force replay of random traces") {
  std::mt19937_64 rng(99);
  for (int round = 0; round < 200; ++round) {
    const std::int64_t threshold = 60 + static_cast<std::int64_t>(rng() % 900);
    const std::int64_t period = 1 + static_cast<std::int64_t>(rng() % 60);
    ActivityTrace trace;
    std::int64_t t = 0;
    while (t < 3000) {
      t += static_cast<std::int64_t>(rng() % (threshold + 200));
      trace.inputs.push_back(t);
    }
    FakeClock clock(50'000);
    ScriptedSources sources(trace, clock, clock.now());
    MemoryLineStore store;
    LineLedger ledger(store);
    LocalLedgerClient client(ledger, Principal::agent_of(AgentId::parse("pc")));
    SimulatedPlatform platform(clock);
    MemoryDedupeJournal journal;
    Agent agent(config_for("pc", threshold), clock, sources.sources(), client, platform, journal, clock.now());

    std::optional<std::int64_t> agent_first;
    std::optional<std::int64_t> oracle_first;
    for (std::int64_t tick = 0; tick <= 4000; tick += period) {
      clock.set(50'000 + tick);
      const auto e = agent.heartbeat_tick();
      if (!agent_first && e.status == Status::kIdle) agent_first = tick;
      // Independent replay: scan the raw input list.
      std::int64_t last = 0;
      for (auto in : trace.inputs) {
        if (in <= tick) last = in;
      }
      if (!oracle_first && tick - last >= threshold) oracle_first = tick;
    }
    REQUIRE(agent_first == oracle_first);
  }
}

TEST_CASE("poll executes an addressed command exactly once") {
  Rig rig;
  auto agent = rig.make();
  rig.issue(pending("c1", "pc-01", CommandKind::kShutdown));
  rig.issue(pending("c2", "pc-02", CommandKind::kRestart));
  auto executed = agent.poll_and_execute();
  CHECK(executed == std::vector<std::string>{"c1"});
  CHECK(rig.platform.count("c1") == 1);
  CHECK(rig.platform.count("c2") == 0);
  CHECK(rig.ledger.find_command("c1")->state == CommandState::kExecuted);
  CHECK(rig.ledger.find_command("c2")->state == CommandState::kPending);
  CHECK(agent.halted());
  CHECK(agent.poll_and_execute().empty());
  CHECK_THROWS_AS(agent.heartbeat_tick(), Error);
}

TEST_CASE("logoff does not halt the agent") {
  Rig rig;
  auto agent = rig.make();
  rig.issue(pending("c1", "pc-01", CommandKind::kLogoff));
  CHECK(agent.poll_and_execute().size() == 1);
  CHECK_FALSE(agent.halted());
  CHECK_NOTHROW(agent.heartbeat_tick());
}

TEST_CASE("commands run in issued_at order") {
  Rig rig;
  auto agent = rig.make();
  rig.issue(pending("second", "pc-01", CommandKind::kLogoff, 1001));
  rig.issue(pending("first", "pc-01", CommandKind::kLogoff, 1000));
  CHECK(agent.poll_and_execute() == std::vector<std::string>{"first", "second"});
}

TEST_CASE("crash replay never re-invokes") {
  for (auto stage : {ExecutionStage::kAfterJournal, ExecutionStage::kAfterInvoke, ExecutionStage::kAfterOutcome}) {
    Rig rig;
    rig.issue(pending("c1", "pc-01", CommandKind::kLogoff));
    {
      auto agent = rig.make();
      agent.set_fault_hook([stage](ExecutionStage s, const CommandEntry&) {
        if (s == stage) throw SimulatedCrash{};
      });
      CHECK_THROWS_AS(agent.poll_and_execute(), SimulatedCrash);
    }
    auto restarted = rig.make();
    restarted.poll_and_execute();
    const auto invoked = rig.platform.count("c1");
    CHECK(invoked == (stage == ExecutionStage::kAfterJournal ? 0u : 1u));
    const auto state = rig.ledger.find_command("c1")->state;
    CHECK(is_terminal(state));
    if (state == CommandState::kExecuted) CHECK(invoked == 1);
    restarted.poll_and_execute();
    CHECK(rig.platform.count("c1") == invoked);
  }
}

TEST_CASE("platform failure transitions to FAILED with the detail") {
  Rig rig;
  auto agent = rig.make();
  rig.platform.set_failure(CommandKind::kRestart, "permission denied");
  rig.issue(pending("c1", "pc-01", CommandKind::kRestart));
  CHECK(agent.poll_and_execute().empty());
  auto c = rig.ledger.find_command("c1");
  CHECK(c->state == CommandState::kFailed);
  CHECK(c->result_note == std::string("permission denied"));
  CHECK_FALSE(agent.halted());
}

TEST_CASE("journal write failure means the command is not executed") {
  Rig rig;
  auto agent = rig.make();
  rig.journal.set_fail_writes(true);
  rig.issue(pending("c1", "pc-01", CommandKind::kShutdown));
  CHECK(agent.poll_and_execute().empty());
  CHECK(rig.platform.invocations().empty());
  CHECK(rig.ledger.find_command("c1")->state == CommandState::kPending);
  rig.journal.set_fail_writes(false);
  CHECK(agent.poll_and_execute() == std::vector<std::string>{"c1"});
}

TEST_CASE("expired commands are never invoked") {
  Rig rig;
  auto agent = rig.make();
  rig.issue(pending("c1", "pc-01", CommandKind::kShutdown, 1000));
  rig.clock.set(1000 + kDefaultCommandExpirySeconds);
  CHECK(agent.poll_and_execute().empty());
  CHECK(rig.platform.invocations().empty());
  CHECK(rig.ledger.find_command("c1")->state == CommandState::kExpired);
}

TEST_CASE("commands too close to expiry are left to expire") {
  Rig rig;
  auto agent = rig.make();
  rig.issue(pending("late", "pc-01", CommandKind::kLogoff, 1000));
  rig.clock.set(1000 + kDefaultCommandExpirySeconds - 29);
  CHECK(agent.poll_and_execute().empty());
  CHECK(rig.platform.invocations().empty());
  CHECK(rig.ledger.find_command("late")->state == CommandState::kPending);

  // Short-lived commands use half their lifetime as the margin.
  auto brief = pending("brief", "pc-01", CommandKind::kLogoff, rig.clock.now());
  brief.expires_at = brief.issued_at + 20;
  rig.issue(brief);
  rig.clock.advance(9);
  CHECK(agent.poll_and_execute() == std::vector<std::string>{"brief"});
}

TEST_CASE("file dedupe journal survives reopen and prunes") {
  const auto path = fs::temp_directory_path() / ("fw-journal-" + std::to_string(std::random_device{}()));
  {
    FileDedupeJournal j(path);
    j.record_intent("a", 100);
    j.record_intent("b", 500);
    j.record_outcome("b", {true, "done"});
  }
  {
    FileDedupeJournal j(path);
    CHECK(j.size() == 2);
    CHECK_FALSE(j.find("a")->outcome);
    CHECK(j.find("b")->outcome == ActionOutcome{true, "done"});
    j.prune(200);
    CHECK(j.size() == 1);
  }
  FileDedupeJournal j(path);
  CHECK(j.size() == 1);
  CHECK_FALSE(j.find("a"));
  fs::remove(path);
}

TEST_CASE("agent config parsing, defaults and env overrides") {
  auto doc = nlohmann::json{{"agent_id", "lab1-pc07"}, {"ledger_root", "/srv/ledger"}};
  auto c = agent_config_from_json(doc);
  CHECK(c.agent_id.str() == "lab1-pc07");
  CHECK(c.idle_threshold_seconds == 600);
  CHECK(c.heartbeat_period_seconds == 30);
  CHECK(c.command_poll_period_seconds == 5);
  CHECK(c.ledger_mode == LedgerMode::kFile);

  ::setenv("FLEETWARDEN_IDLE_THRESHOLD_SECONDS", "1200", 1);
  ::setenv("FLEETWARDEN_AGENT_ID", "lab2-pc01", 1);
  c = agent_config_from_json(doc);
  ::unsetenv("FLEETWARDEN_IDLE_THRESHOLD_SECONDS");
  ::unsetenv("FLEETWARDEN_AGENT_ID");
  CHECK(c.idle_threshold_seconds == 1200);
  CHECK(c.agent_id.str() == "lab2-pc01");

  doc["idle_threshold_seconds"] = 59;
  CHECK_THROWS_AS(agent_config_from_json(doc), Error);
  doc["idle_threshold_seconds"] = 600;
  doc["heartbeat_period_seconds"] = 0;
  CHECK_THROWS_AS(agent_config_from_json(doc), Error);
  doc["heartbeat_period_seconds"] = 30;
  doc["ledger_mode"] = "http";
  CHECK_THROWS_AS(agent_config_from_json(doc), Error);  // endpoint missing
}

TEST_CASE("trace parsing") {
  const auto trace = ActivityTrace::parse(
      "# comment\n"
      "0 input\n"
      "0 proc explorer.exe 100 2048\n"
      "0 proc editor 101\n"
      "10 traffic 1000 500\n"
      "60 proc explorer.exe 100\n"
      "90 input\n");
  CHECK(trace.inputs == std::vector<std::int64_t>{0, 90});
  CHECK(trace.processes_at(30).size() == 2);
  CHECK(trace.processes_at(60).size() == 1);
  CHECK(trace.traffic_at(5) == TrafficCounters{});
  CHECK(trace.traffic_at(10).rx_bytes == 1000);
  CHECK(trace.last_input_at(89) == 0);
  CHECK(ActivityTrace::parse(trace.format()).format() == trace.format());

  try {
    ActivityTrace::parse("0 input\n5 input\n3 input\n");
    FAIL("expected parse error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(ActivityTrace::parse("0 dance\n"), Error);
  CHECK_THROWS_AS(ActivityTrace::parse("0 proc x 0\n"), Error);
}

TEST_CASE("net dev parsing skips loopback") {
  const char* text =
      "Inter-|   Receive                                                |  Transmit\n"
      " face |bytes    packets errs drop fifo frame compressed multicast|bytes    packets errs drop fifo colls "
      "carrier compressed\n"
      "    lo:  5000      50    0    0    0     0          0         0     5000      50    0    0    0     0       0  "
      "        0\n"
      "  eth0: 12000     100    0    0    0     0          0         0     3000      30    0    0    0     0       0  "
      "        0\n"
      " wlan0:   500       5    0    0    0     0          0         0      200       2    0    0    0     0       0  "
      "        0\n";
  auto c = parse_net_dev(text);
  REQUIRE(c);
  CHECK(c->rx_bytes == 12500);
  CHECK(c->rx_packets == 105);
  CHECK(c->tx_bytes == 3200);
  CHECK(c->tx_packets == 32);
}

TEST_CASE("procfs source reads this process") {
  ProcfsProcessSource source;
  auto procs = source.processes();
  REQUIRE(procs);
  const auto self = static_cast<std::int64_t>(::getpid());
  CHECK(std::any_of(procs->begin(), procs->end(), [&](const ProcessInfo& p) { return p.pid == self; }));
}
