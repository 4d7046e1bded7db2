#pragma once

#include "fleetwarden/core/clock.hpp"
#include "fleetwarden/ledger/types.hpp"

#include <array>
#include <map>
#include <string>
#include <vector>

namespace fleetwarden {

enum class EnergyState { kActive, kIdle, kSleep, kOff };
inline constexpr std::size_t kEnergyStateCount = 4;

std::string_view to_string(EnergyState s);
std::optional<EnergyState> parse_power_state(std::string_view text);

/// Energy in milliwatt-seconds. Integer so that sums, splits and
/// baseline = actual + saved hold exactly.
using MilliwattSeconds = std::int64_t;

double to_wh(MilliwattSeconds e);
/// One decimal with thousands separators, e.g. "19,950.0".
std::string format_wh(MilliwattSeconds e);

/// Draw per state in milliwatts; off <= sleep <= idle <= active.
struct PowerModel {
  std::int64_t active_mw = 0;
  std::int64_t idle_mw = 0;
  std::int64_t sleep_mw = 0;
  std::int64_t off_mw = 0;

  static PowerModel from_watts(double active, double idle, double sleep, double off);  // validates
  std::int64_t milliwatts(EnergyState s) const;
  void validate() const;  // throws Error(kValidation)

  friend bool operator==(const PowerModel&, const PowerModel&) = default;
};

double power_draw(const PowerModel& model, EnergyState state);  // watts

using ModelTable = std::map<std::string, PowerModel, std::less<>>;

/// "crt" 210/210/5/0 W, "lcd" and "other" 160/160/5/0 W.
ModelTable default_models();

struct StateInterval {
  AgentId agent;
  EnergyState state = EnergyState::kOff;
  Timestamp start = 0;
  Timestamp end = 0;

  std::int64_t duration() const { return end - start; }
  friend bool operator==(const StateInterval&, const StateInterval&) = default;
};

struct EnergyTotals {
  std::map<AgentId, MilliwattSeconds> per_agent;
  MilliwattSeconds total = 0;
};

/// Sum of draw x duration. Throws Error(kOverlap) naming the agent and times
/// when one agent's intervals overlap, Error(kNotFound) for an agent with no
/// model, Error(kValidation) for end < start.
EnergyTotals energy(const std::vector<StateInterval>& intervals, const std::map<AgentId, PowerModel>& models);

struct SavingsReport {
  MilliwattSeconds baseline = 0;
  MilliwattSeconds actual = 0;
  MilliwattSeconds saved = 0;  // baseline - actual
  std::map<AgentId, MilliwattSeconds> baseline_per_agent;
  std::map<AgentId, MilliwattSeconds> actual_per_agent;

  double baseline_wh() const { return to_wh(baseline); }
  double actual_wh() const { return to_wh(actual); }
  double saved_wh() const { return to_wh(saved); }
  double saved_fraction() const { return baseline == 0 ? 0.0 : static_cast<double>(saved) / baseline; }
};

/// Throws Error(kSpanMismatch) unless each agent's two timelines start and
/// end at the same times and cover the same number of seconds.
SavingsReport savings_report(const std::vector<StateInterval>& baseline, const std::vector<StateInterval>& actual,
                             const std::map<AgentId, PowerModel>& models);

/// The same intervals with every state replaced by ACTIVE.
std::vector<StateInterval> always_on(std::vector<StateInterval> intervals);

/// Parts of the intervals that fall inside [since, until).
std::vector<StateInterval> clip(const std::vector<StateInterval>& intervals, Timestamp since, Timestamp until);

/// Seconds spent in each state over one summary period.
struct Occupancy {
  AgentId agent;
  Timestamp start = 0;
  Timestamp end = 0;
  std::array<std::int64_t, kEnergyStateCount> seconds{};

  std::int64_t& operator[](EnergyState s) { return seconds[static_cast<std::size_t>(s)]; }
  std::int64_t operator[](EnergyState s) const { return seconds[static_cast<std::size_t>(s)]; }
  friend bool operator==(const Occupancy&, const Occupancy&) = default;
};

MilliwattSeconds energy_of(const Occupancy& occupancy, const PowerModel& model);

/// Folds intervals into fixed periods aligned to multiples of `period`.
/// Seconds of a period not covered by any interval count as OFF.
class OccupancyAccumulator {
 public:
  explicit OccupancyAccumulator(std::int64_t period) : period_(period) {}

  void add(const StateInterval& interval);
  /// Completed periods ending at or before `t`, in (start, agent) order.
  std::vector<Occupancy> flush(Timestamp t);
  std::int64_t period() const { return period_; }

 private:
  std::int64_t period_;
  std::map<std::pair<Timestamp, AgentId>, Occupancy> open_;
};

/// Derives per-agent state timelines from what the controller observes.
/// A heartbeat puts the machine in ACTIVE (BUSY) or IDLE for up to
/// `coverage_seconds`; after that, unobserved time is OFF. An executed
/// SHUTDOWN or RESTART means OFF and an executed HIBERNATE means SLEEP, each
/// until the next heartbeat. State changes take effect at the observation
/// time.
class TimelineBuilder {
 public:
  explicit TimelineBuilder(std::int64_t coverage_seconds) : coverage_(coverage_seconds) {}

  /// Starts an agent's timeline in OFF. Implicit on first observation.
  void track(const AgentId& agent, Timestamp start);
  void heartbeat(const StatusEntry& entry, Timestamp observed_at);
  void command_executed(const CommandEntry& command, Timestamp observed_at);

  /// Closes every timeline up to `t`; returns the intervals completed since
  /// the last call, ordered by (start, agent). Zero-length pieces are dropped.
  std::vector<StateInterval> advance_to(Timestamp t);

 private:
  struct Current {
    EnergyState state = EnergyState::kOff;
    Timestamp since = 0;
    std::optional<Timestamp> until;  // coverage limit for ACTIVE/IDLE
  };
  void transition(const AgentId& agent, EnergyState state, Timestamp at, std::optional<Timestamp> until);
  void settle(const AgentId& agent, Current& current, Timestamp t);

  std::int64_t coverage_;
  std::map<AgentId, Current> current_;
  std::vector<StateInterval> done_;
};

}  // namespace fleetwarden
