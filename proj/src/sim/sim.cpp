#include "fleetwarden/sim/sim.hpp"

#include "fleetwarden/agent/agent.hpp"
#include "fleetwarden/agent/dedupe_journal.hpp"
#include "fleetwarden/controller/controller.hpp"
#include "fleetwarden/core/error.hpp"
#include "fleetwarden/ledger/codec.hpp"

#include <algorithm>
#include <memory>
#include <random>
#include <set>
#include <sstream>

namespace fleetwarden {
namespace {

std::string join(const std::vector<std::string>& items) {
  if (items.empty()) return "-";
  std::string out;
  for (const auto& item : items) {
    if (!out.empty()) out += ',';
    out += item;
  }
  return out;
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  if (text == "-") return out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto end = comma == std::string_view::npos ? text.size() : comma;
    if (end > start) out.emplace_back(text.substr(start, end - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

// `key=value` field of a space-separated admin line.
std::optional<std::string> field(std::string_view line, std::string_view key) {
  std::size_t pos = 0;
  while (pos < line.size()) {
    auto end = line.find(' ', pos);
    if (end == std::string_view::npos) end = line.size();
    const auto token = line.substr(pos, end - pos);
    if (token.size() > key.size() && token.substr(0, key.size()) == key && token[key.size()] == '=') {
      return std::string(token.substr(key.size() + 1));
    }
    pos = end + 1;
  }
  return std::nullopt;
}

bool starts_with(std::string_view text, std::string_view prefix) { return text.substr(0, prefix.size()) == prefix; }

std::string view_line(const FleetView& view) {
  std::vector<std::string> active, stale, offline;
  for (const auto& row : view.rows) {
    auto& bucket = row.liveness == Liveness::kActive ? active : row.liveness == Liveness::kStale ? stale : offline;
    bucket.push_back(row.machine.agent.str());
  }
  return "view active=" + join(active) + " stale=" + join(stale) + " offline=" + join(offline);
}

std::string error_suffix(const Error& e) { return " error=" + std::string(to_string(e.code())); }

// Forwards to a memory store and copies every appended event into the trace.
class RecordingEventStore final : public EventStore {
 public:
  RecordingEventStore(const Clock& clock, Trace& trace) : clock_(clock), trace_(trace) {}

  EventId append(FleetEvent event) override {
    const auto id = inner_.append(event);
    event.event_id = id;
    trace_.records.push_back({clock_.now(), "event", encode_event(event)});
    return id;
  }
  std::vector<FleetEvent> events() const override { return inner_.events(); }
  EventId last_id() const override { return inner_.last_id(); }

 private:
  const Clock& clock_;
  Trace& trace_;
  MemoryEventStore inner_;
};

enum class Power { kOff, kOn, kRebooting, kSleeping };

struct SimMachine {
  SimMachine(const MachineSpec& machine, const Clock& clock, LineLedger& ledger, Timestamp origin)
      : spec(machine),
        sources(machine.trace, clock, origin),
        platform(clock),
        client(ledger, Principal::agent_of(machine.agent)) {}

  const MachineSpec& spec;
  ScriptedSources sources;
  SimulatedPlatform platform;
  MemoryDedupeJournal journal;
  LocalLedgerClient client;
  std::unique_ptr<Agent> agent;
  Power power = Power::kOff;
  bool booted_once = false;
  std::int64_t boot_rel = 0;
  std::int64_t wake_rel = 0;   // rebooting: when the machine comes back
  std::int64_t sleep_rel = 0;  // sleeping: since when
  std::int64_t heartbeat_phase = 0;
  std::int64_t poll_phase = 0;
};

class Simulation {
 public:
  explicit Simulation(const Scenario& scenario)
      : scenario_(scenario),
        clock_(scenario.start),
        ledger_(store_),
        events_(clock_, result_.trace),
        ids_(scenario.seed) {
    store_.set_observer([this](const std::string&, std::string_view line) {
      result_.trace.records.push_back({clock_.now(), "ledger", std::string(line)});
    });

    ControllerConfig config;
    config.heartbeat_period_seconds = scenario.heartbeat_period_seconds;
    config.command_expiry_seconds = scenario.command_expiry_seconds;
    config.summary_period_seconds = scenario.summary_period_seconds;
    config.tick_period_seconds = scenario.tick_period_seconds;
    config.watchlist = scenario.watchlist;
    config.policy = scenario.policy;
    config.ledger_root = "memory";
    controller_ = std::make_unique<Controller>(config, clock_, ledger_, events_, prober_, ids_);

    std::mt19937_64 rng(scenario.seed);
    for (const auto& spec : scenario.machines) {
      auto m = std::make_unique<SimMachine>(spec, clock_, ledger_, scenario.start);
      m->heartbeat_phase = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(scenario.heartbeat_period_seconds));
      m->poll_phase = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(scenario.poll_period_seconds));
      auto* raw = m.get();
      m->platform.set_observer([this, raw](const SimulatedPlatform::Invocation& inv, const ActionOutcome& outcome) {
        result_.trace.records.push_back({clock_.now(), "platform",
                                         raw->spec.agent.str() + " " + std::string(to_string(inv.kind)) + " " +
                                             inv.command_id + (outcome.ok ? " ok" : " failed")});
        result_.invocation_agents.emplace(inv.command_id, raw->spec.agent);
      });
      if (spec.registered) controller_->register_machine(spec.agent, spec.address, spec.display_class);
      machines_.push_back(std::move(m));
    }
  }

  ScenarioResult run() {
    const auto& s = scenario_;
    std::size_t next_action = 0;
    std::int64_t rel = 0;
    for (; rel <= s.duration_seconds; ++rel) {
      step(rel, next_action);
    }
    // Keep running until every issued command is settled or expired.
    const auto horizon = s.duration_seconds + s.command_expiry_seconds + s.tick_period_seconds + 1;
    for (; rel <= horizon && has_pending(); ++rel) step(rel, next_action);

    result_.final_view = controller_->view();
    result_.commands = ledger_.commands();
    for (const auto& m : machines_) {
      auto invocations = m->platform.invocations();
      result_.invocations.insert(result_.invocations.end(), invocations.begin(), invocations.end());
    }
    std::stable_sort(result_.invocations.begin(), result_.invocations.end(),
                     [](const auto& a, const auto& b) { return a.at < b.at; });
    return std::move(result_);
  }

 private:
  bool has_pending() {
    const auto commands = ledger_.commands();
    return std::any_of(commands.begin(), commands.end(),
                       [](const CommandEntry& c) { return c.state == CommandState::kPending; });
  }

  void step(std::int64_t rel, std::size_t& next_action) {
    clock_.set(scenario_.start + rel);
    for (auto& m : machines_) power_transitions(*m, rel);
    while (next_action < scenario_.timeline.size() && scenario_.timeline[next_action].at == rel) {
      admin(scenario_.timeline[next_action++]);
    }
    if (rel % scenario_.tick_period_seconds == 0) controller_->tick();
    for (auto& m : machines_) {
      if (m->agent && due(rel - m->boot_rel, m->poll_phase, scenario_.poll_period_seconds)) poll(*m, rel);
    }
    for (auto& m : machines_) {
      if (m->agent && due(rel - m->boot_rel, m->heartbeat_phase, scenario_.heartbeat_period_seconds)) {
        m->agent->heartbeat_tick();
      }
    }
  }

  static bool due(std::int64_t since_boot, std::int64_t phase, std::int64_t period) {
    return since_boot >= phase && (since_boot - phase) % period == 0;
  }

  void power_transitions(SimMachine& m, std::int64_t rel) {
    switch (m.power) {
      case Power::kOff:
        if (!m.booted_once && rel == m.spec.power_on_at) boot(m, rel);
        break;
      case Power::kRebooting:
        if (rel >= m.wake_rel) boot(m, rel);
        break;
      case Power::kSleeping: {
        const auto last = m.spec.trace.last_input_at(rel);
        if (last && *last > m.sleep_rel) boot(m, rel);
        break;
      }
      case Power::kOn:
        break;
    }
  }

  void boot(SimMachine& m, std::int64_t rel) {
    if (m.booted_once) m.sources.reset_counters();
    AgentConfig config{.agent_id = m.spec.agent};
    config.idle_threshold_seconds = scenario_.idle_threshold_seconds;
    config.heartbeat_period_seconds = scenario_.heartbeat_period_seconds;
    config.command_poll_period_seconds = scenario_.poll_period_seconds;
    config.ledger_root = "memory";
    m.agent = std::make_unique<Agent>(config, clock_, m.sources.sources(), m.client, m.platform, m.journal,
                                      clock_.now());
    m.power = Power::kOn;
    m.booted_once = true;
    m.boot_rel = rel;
    m.platform.set_power(PowerState::kOn);
    prober_.set_alive(m.spec.address, true);
  }

  void poll(SimMachine& m, std::int64_t rel) {
    m.agent->poll_and_execute();
    if (!m.agent->halted()) return;
    const auto invocations = m.platform.invocations();
    const auto kind = invocations.back().kind;
    m.agent.reset();
    prober_.set_alive(m.spec.address, false);
    if (kind == CommandKind::kRestart) {
      m.power = Power::kRebooting;
      m.wake_rel = rel + m.spec.restart_delay_seconds;
      m.platform.set_power(PowerState::kOff);
    } else if (kind == CommandKind::kHibernate) {
      m.power = Power::kSleeping;
      m.sleep_rel = rel;
      m.platform.set_power(PowerState::kSleep);
    } else {
      m.power = Power::kOff;
      m.platform.set_power(PowerState::kOff);
    }
  }

  void admin(const AdminAction& a) {
    auto& trace = result_.trace.records;
    const auto now = clock_.now();
    auto mark = [&](std::string line) { trace.push_back({now, "admin", std::move(line)}); };
    const auto agent = a.agent ? a.agent->str() : std::string();
    switch (a.kind) {
      case AdminKind::kStartup:
        mark("startup registered=" + std::to_string(controller_->registry().size()));
        break;
      case AdminKind::kScan:
        try {
          mark("scan " + a.range + " alive=" + join(controller_->scan(a.range)));
        } catch (const Error& e) {
          mark("scan " + a.range + error_suffix(e));
        }
        break;
      case AdminKind::kView:
        mark(view_line(controller_->view()));
        break;
      case AdminKind::kDetail:
        try {
          const auto d = controller_->detail(*a.agent);
          const auto processes = d.row.latest ? d.row.latest->processes.size() : 0;
          mark("detail " + agent + " liveness=" + std::string(to_string(d.row.liveness)) +
               " processes=" + std::to_string(processes) + " suspicious=" + join(d.row.suspicious) +
               " commands=" + std::to_string(d.commands.size()));
        } catch (const Error& e) {
          mark("detail " + agent + error_suffix(e));
        }
        break;
      case AdminKind::kIssue: {
        const auto kind = std::string(to_string(*a.command));
        try {
          auto before = controller_->view();
          const auto command = controller_->issue_action(*a.agent, *a.command);
          mark("issue " + agent + " " + kind + " " + command.command_id);
          issued_.insert_or_assign(*a.agent, std::pair{command.command_id, std::move(before)});
        } catch (const Error& e) {
          mark("issue " + agent + " " + kind + error_suffix(e));
        }
        break;
      }
      case AdminKind::kAck: {
        const auto it = issued_.find(*a.agent);
        if (it == issued_.end()) {
          mark("ack " + agent + " none");
          break;
        }
        const auto command = controller_->command(it->second.first);
        const auto status = confirm_acknowledgement(it->second.second, controller_->view(), *a.agent, command);
        mark("ack " + agent + " " + command.command_id + " " + std::string(to_string(command.state)) + " " +
             std::string(to_string(status)));
        break;
      }
      case AdminKind::kRegister: {
        const auto& spec = machine(*a.agent).spec;
        try {
          controller_->register_machine(spec.agent, spec.address, spec.display_class);
          mark("register " + agent + " " + spec.address);
        } catch (const Error& e) {
          mark("register " + agent + error_suffix(e));
        }
        break;
      }
      case AdminKind::kQuarantine:
        try {
          controller_->quarantine(*a.agent, a.on);
          mark("quarantine " + agent + (a.on ? " on" : " off"));
        } catch (const Error& e) {
          mark("quarantine " + agent + error_suffix(e));
        }
        break;
    }
  }

  SimMachine& machine(const AgentId& agent) {
    for (auto& m : machines_) {
      if (m->spec.agent == agent) return *m;
    }
    throw Error(ErrorCode::kNotFound, "no simulated machine " + agent.str());
  }

  const Scenario& scenario_;
  ScenarioResult result_;
  FakeClock clock_;
  MemoryLineStore store_;
  LineLedger ledger_;
  RecordingEventStore events_;
  FixtureProber prober_;
  IdGenerator ids_;
  std::unique_ptr<Controller> controller_;
  std::vector<std::unique_ptr<SimMachine>> machines_;
  std::map<AgentId, std::pair<std::string, FleetView>> issued_;
};

std::optional<CommandEntry> ledger_command(const TraceRecord& r) {
  if (r.source != "ledger") return std::nullopt;
  const auto decoded = decode_record(r.line);
  if (!decoded.ok()) return std::nullopt;
  if (const auto* c = std::get_if<CommandEntry>(&decoded.record())) return *c;
  return std::nullopt;
}

bool in_list(const TraceRecord& r, std::string_view key, const std::string& agent) {
  const auto list = field(r.line, key);
  if (!list) return false;
  const auto items = split_list(*list);
  return std::find(items.begin(), items.end(), agent) != items.end();
}

}  // namespace

std::string Trace::format() const {
  std::ostringstream out;
  for (const auto& r : records) out << r.at << ' ' << r.source << ' ' << r.line << '\n';
  return out.str();
}

ScenarioResult run_scenario(const Scenario& scenario) {
  scenario.validate();
  return Simulation(scenario).run();
}

SequenceResult assert_sequence(const Trace& trace, const std::vector<StepPredicate>& steps) {
  SequenceResult result;
  auto it = trace.records.begin();
  for (const auto& step : steps) {
    it = std::find_if(it, trace.records.end(), step.matches);
    if (it == trace.records.end()) {
      result.ok = false;
      result.first_unmatched = step.name;
      return result;
    }
    ++result.matched;
    ++it;
  }
  return result;
}

std::vector<StepPredicate> shutdown_walkthrough(const AgentId& target) {
  const auto id = target.str();
  auto admin = [](const TraceRecord& r, std::string_view prefix) {
    return r.source == "admin" && starts_with(r.line, prefix);
  };
  auto command_in = [target](const TraceRecord& r, CommandState state) {
    const auto c = ledger_command(r);
    return c && c->target == target && c->kind == CommandKind::kShutdown && c->state == state;
  };
  return {
      {"startup retrieval", [=](const TraceRecord& r) { return admin(r, "startup "); }},
      {"scan", [=](const TraceRecord& r) { return admin(r, "scan ") && field(r.line, "alive").value_or("-") != "-"; }},
      {"list display", [=](const TraceRecord& r) { return admin(r, "view ") && in_list(r, "active", id); }},
      {"selection/detail", [=](const TraceRecord& r) { return admin(r, "detail " + id + " liveness=ACTIVE"); }},
      {"action issuance", [=](const TraceRecord& r) { return command_in(r, CommandState::kPending); }},
      {"agent-side execution",
       [=](const TraceRecord& r) {
         return r.source == "platform" && starts_with(r.line, id + " SHUTDOWN ") && r.line.ends_with(" ok");
       }},
      {"acknowledgement transition", [=](const TraceRecord& r) { return command_in(r, CommandState::kExecuted); }},
      {"updated list without the machine",
       [=](const TraceRecord& r) {
         return admin(r, "view ") && !in_list(r, "active", id) &&
                (in_list(r, "stale", id) || in_list(r, "offline", id));
       }},
  };
}

// Crash/replay harness --------------------------------------------------------

namespace {

struct SimulatedCrash {};

}  // namespace

CrashTrialResult run_crash_trial(std::uint64_t seed) {
  static const CommandKind kKinds[] = {CommandKind::kShutdown, CommandKind::kRestart, CommandKind::kLogoff,
                                       CommandKind::kHibernate};
  static const ExecutionStage kStages[] = {ExecutionStage::kBeforeJournal, ExecutionStage::kAfterJournal,
                                           ExecutionStage::kAfterInvoke, ExecutionStage::kAfterOutcome};
  std::mt19937_64 rng(seed);
  auto between = [&](std::int64_t lo, std::int64_t hi) { return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng); };
  auto chance = [&](int percent) { return between(0, 99) < percent; };

  CrashTrialResult result;
  FakeClock clock(1'700'000'000);
  MemoryLineStore store;
  LineLedger ledger(store);
  const auto target = AgentId::parse("pc-crash");
  LocalLedgerClient client(ledger, Principal::agent_of(target));
  SimulatedPlatform platform(clock);
  MemoryDedupeJournal journal;
  const ActivityTrace trace;
  ScriptedSources sources(trace, clock, clock.now());
  IdGenerator ids(seed);

  AgentConfig config{.agent_id = target};
  config.ledger_root = "memory";
  std::unique_ptr<Agent> agent;
  Timestamp down_until = clock.now();

  auto poll = [&](bool faults) {
    if (!agent) {
      if (clock.now() < down_until) return;
      agent = std::make_unique<Agent>(config, clock, sources.sources(), client, platform, journal, clock.now());
    }
    if (faults && chance(30)) {
      const auto stage = kStages[between(0, 3)];
      agent->set_fault_hook([stage](ExecutionStage s, const CommandEntry&) {
        if (s == stage) throw SimulatedCrash{};
      });
    }
    journal.set_fail_writes(faults && chance(10));
    for (const auto kind : kKinds) {
      platform.set_failure(kind, faults && chance(5) ? std::optional<std::string>("simulated failure") : std::nullopt);
    }
    try {
      agent->poll_and_execute();
    } catch (const SimulatedCrash&) {
      // The process dies; a supervisor restarts it shortly.
      ++result.crashes;
      agent.reset();
      down_until = clock.now() + between(1, 15);
    }
    journal.set_fail_writes(false);
    if (agent && agent->halted()) {
      // The machine went down; it comes back some time later.
      agent.reset();
      down_until = clock.now() + between(10, 120);
    }
  };

  const auto steps = between(20, 80);
  for (std::int64_t i = 0; i < steps; ++i) {
    if (chance(30)) {
      const auto now = clock.now();
      const CommandEntry command{.command_id = ids.next(),
                                 .target = target,
                                 .kind = kKinds[between(0, 3)],
                                 .issued_at = now,
                                 .expires_at = now + between(60, 300)};
      ledger.append(command, Principal::controller());
      ++result.commands;
      continue;
    }
    clock.advance(between(1, 10));
    ledger.expire_overdue(clock.now());
    poll(true);
  }

  for (int i = 0; i < 1000; ++i) {
    const auto commands = ledger.commands();
    if (std::none_of(commands.begin(), commands.end(),
                     [](const CommandEntry& c) { return c.state == CommandState::kPending; })) {
      break;
    }
    clock.advance(5);
    ledger.expire_overdue(clock.now());
    poll(false);
  }

  std::set<std::string> known;
  for (const auto& c : ledger.commands()) {
    known.insert(c.command_id);
    const auto n = platform.count(c.command_id);
    result.invocations += n;
    switch (c.state) {
      case CommandState::kExecuted:
        ++result.executed;
        if (n != 1) result.violations.push_back(c.command_id + " EXECUTED with " + std::to_string(n) + " invocations");
        break;
      case CommandState::kExpired:
        ++result.expired;
        if (n != 0) result.violations.push_back(c.command_id + " EXPIRED with " + std::to_string(n) + " invocations");
        break;
      case CommandState::kFailed:
        ++result.failed;
        if (n > 1) result.violations.push_back(c.command_id + " FAILED with " + std::to_string(n) + " invocations");
        break;
      case CommandState::kPending:
        result.violations.push_back(c.command_id + " still PENDING");
        break;
    }
  }
  for (const auto& inv : platform.invocations()) {
    if (!known.contains(inv.command_id)) result.violations.push_back("invocation of unknown " + inv.command_id);
  }
  return result;
}

}  // namespace fleetwarden
