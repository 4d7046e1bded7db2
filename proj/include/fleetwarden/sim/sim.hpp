#pragma once

#include "fleetwarden/agent/platform.hpp"
#include "fleetwarden/controller/fleet_view.hpp"
#include "fleetwarden/sim/scenario.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace fleetwarden {

/// One line of simulation output. `source` is one of "admin", "ledger",
/// "event" or "platform"; `line` is the admin marker, the ledger line, the
/// encoded event or `<agent> <KIND> <command_id> ok|failed`.
struct TraceRecord {
  Timestamp at = 0;
  std::string source;
  std::string line;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct Trace {
  std::vector<TraceRecord> records;

  /// `<at> <source> <line>` per record, newline-terminated.
  std::string format() const;
};

struct ScenarioResult {
  Trace trace;
  FleetView final_view;
  std::vector<CommandEntry> commands;  // final state, by issued_at
  std::vector<SimulatedPlatform::Invocation> invocations;
  std::map<std::string, AgentId> invocation_agents;  // command_id -> machine that ran it
};

/// Runs agents, controller and policy on a fake clock, one second at a time.
/// Within a second: admin actions, controller tick, agent polls, agent
/// heartbeats. After the timeline ends the run continues until no command is
/// pending, so every issued command reaches a terminal state.
ScenarioResult run_scenario(const Scenario& scenario);

struct StepPredicate {
  std::string name;
  std::function<bool(const TraceRecord&)> matches;
};

struct SequenceResult {
  bool ok = true;
  std::size_t matched = 0;
  std::string first_unmatched;  // name of the first step without a match
};

/// Greedy ordered-subsequence match of `steps` against the trace.
SequenceResult assert_sequence(const Trace& trace, const std::vector<StepPredicate>& steps);

/// The eight steps of the admin shutdown walk-through for `target`.
std::vector<StepPredicate> shutdown_walkthrough(const AgentId& target);

// Crash/replay harness --------------------------------------------------------

struct CrashTrialResult {
  std::size_t commands = 0;
  std::size_t executed = 0;
  std::size_t failed = 0;
  std::size_t expired = 0;
  std::size_t crashes = 0;
  std::size_t invocations = 0;
  std::vector<std::string> violations;
};

/// One randomized interleaving: commands issued at random times, the agent
/// polling, crashing at random execution stages and restarting, journal
/// write failures, halting actions taking the machine down for a while and
/// the controller expiring overdue commands. Checks that EXECUTED commands
/// were invoked exactly once and EXPIRED ones never.
CrashTrialResult run_crash_trial(std::uint64_t seed);

}  // namespace fleetwarden
