#include "fleetwarden/energy/energy.hpp"

#include "fleetwarden/core/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace fleetwarden {

namespace {

constexpr std::array<std::string_view, kEnergyStateCount> kStateNames = {"ACTIVE", "IDLE", "SLEEP", "OFF"};

std::int64_t milliwatts_of(double watts) {
  if (!std::isfinite(watts) || watts < 0) throw Error(ErrorCode::kValidation, "invariant violation: watts");
  return std::llround(watts * 1000.0);
}

std::map<AgentId, std::vector<const StateInterval*>> by_agent(const std::vector<StateInterval>& intervals) {
  std::map<AgentId, std::vector<const StateInterval*>> out;
  for (const auto& iv : intervals) {
    if (iv.end < iv.start) {
      throw Error(ErrorCode::kValidation, "invariant violation: interval end before start for " + iv.agent.str());
    }
    out[iv.agent].push_back(&iv);
  }
  for (auto& [agent, list] : out) {
    std::sort(list.begin(), list.end(), [](const StateInterval* a, const StateInterval* b) {
      return std::tie(a->start, a->end) < std::tie(b->start, b->end);
    });
    for (std::size_t i = 1; i < list.size(); ++i) {
      if (list[i]->start < list[i - 1]->end) {
        throw Error(ErrorCode::kOverlap, "overlapping intervals for " + agent.str() + ": [" +
                                             std::to_string(list[i - 1]->start) + ", " +
                                             std::to_string(list[i - 1]->end) + ") and [" +
                                             std::to_string(list[i]->start) + ", " + std::to_string(list[i]->end) +
                                             ")");
      }
    }
  }
  return out;
}

const PowerModel& model_for(const std::map<AgentId, PowerModel>& models, const AgentId& agent) {
  auto it = models.find(agent);
  if (it == models.end()) throw Error(ErrorCode::kNotFound, "no power model for " + agent.str());
  return it->second;
}

}  // namespace

std::string_view to_string(EnergyState s) { return kStateNames[static_cast<std::size_t>(s)]; }

std::optional<EnergyState> parse_power_state(std::string_view text) {
  for (std::size_t i = 0; i < kStateNames.size(); ++i) {
    if (kStateNames[i] == text) return static_cast<EnergyState>(i);
  }
  return std::nullopt;
}

double to_wh(MilliwattSeconds e) { return static_cast<double>(e) / 3.6e6; }

std::string format_wh(MilliwattSeconds e) {
  // Round to tenths of a watt-hour (360,000 mWs) in integers, half away from zero.
  constexpr MilliwattSeconds kTenth = 360'000;
  const bool negative = e < 0;
  const MilliwattSeconds magnitude = negative ? -e : e;
  const MilliwattSeconds tenths = (magnitude + kTenth / 2) / kTenth;
  std::string whole = std::to_string(tenths / 10);
  for (int i = static_cast<int>(whole.size()) - 3; i > 0; i -= 3) whole.insert(static_cast<std::size_t>(i), ",");
  return (negative && tenths != 0 ? "-" : "") + whole + "." + std::to_string(tenths % 10);
}

PowerModel PowerModel::from_watts(double active, double idle, double sleep, double off) {
  PowerModel m{milliwatts_of(active), milliwatts_of(idle), milliwatts_of(sleep), milliwatts_of(off)};
  m.validate();
  return m;
}

std::int64_t PowerModel::milliwatts(EnergyState s) const {
  switch (s) {
    case EnergyState::kActive: return active_mw;
    case EnergyState::kIdle: return idle_mw;
    case EnergyState::kSleep: return sleep_mw;
    case EnergyState::kOff: return off_mw;
  }
  return 0;
}

void PowerModel::validate() const {
  if (off_mw < 0 || off_mw > sleep_mw || sleep_mw > idle_mw || idle_mw > active_mw) {
    throw Error(ErrorCode::kValidation, "invariant violation: power model requires off <= sleep <= idle <= active");
  }
}

double power_draw(const PowerModel& model, EnergyState state) {
  return static_cast<double>(model.milliwatts(state)) / 1000.0;
}

ModelTable default_models() {
  return {{"crt", PowerModel::from_watts(210, 210, 5, 0)},
          {"lcd", PowerModel::from_watts(160, 160, 5, 0)},
          {"other", PowerModel::from_watts(160, 160, 5, 0)}};
}

EnergyTotals energy(const std::vector<StateInterval>& intervals, const std::map<AgentId, PowerModel>& models) {
  EnergyTotals totals;
  for (const auto& [agent, list] : by_agent(intervals)) {
    const auto& model = model_for(models, agent);
    MilliwattSeconds sum = 0;
    for (const auto* iv : list) sum += model.milliwatts(iv->state) * iv->duration();
    totals.per_agent[agent] = sum;
    totals.total += sum;
  }
  return totals;
}

SavingsReport savings_report(const std::vector<StateInterval>& baseline, const std::vector<StateInterval>& actual,
                             const std::map<AgentId, PowerModel>& models) {
  const auto base_groups = by_agent(baseline);
  const auto actual_groups = by_agent(actual);
  struct Span {
    Timestamp start;
    Timestamp end;
    std::int64_t covered;
  };
  const auto span_of = [](const std::vector<const StateInterval*>& list) {
    Span s{list.front()->start, list.front()->end, 0};
    for (const auto* iv : list) {
      s.start = std::min(s.start, iv->start);
      s.end = std::max(s.end, iv->end);
      s.covered += iv->duration();
    }
    return s;
  };
  if (base_groups.size() != actual_groups.size()) {
    throw Error(ErrorCode::kSpanMismatch, "baseline and actual cover different agents");
  }
  for (const auto& [agent, list] : base_groups) {
    auto it = actual_groups.find(agent);
    if (it == actual_groups.end()) throw Error(ErrorCode::kSpanMismatch, "no actual timeline for " + agent.str());
    const auto a = span_of(list);
    const auto b = span_of(it->second);
    if (a.start != b.start || a.end != b.end || a.covered != b.covered) {
      throw Error(ErrorCode::kSpanMismatch, "timelines for " + agent.str() + " cover different spans");
    }
  }
  const auto base_totals = energy(baseline, models);
  const auto actual_totals = energy(actual, models);
  SavingsReport report;
  report.baseline = base_totals.total;
  report.actual = actual_totals.total;
  report.saved = report.baseline - report.actual;
  report.baseline_per_agent = base_totals.per_agent;
  report.actual_per_agent = actual_totals.per_agent;
  return report;
}

std::vector<StateInterval> always_on(std::vector<StateInterval> intervals) {
  for (auto& iv : intervals) iv.state = EnergyState::kActive;
  return intervals;
}

std::vector<StateInterval> clip(const std::vector<StateInterval>& intervals, Timestamp since, Timestamp until) {
  std::vector<StateInterval> out;
  for (const auto& iv : intervals) {
    const auto start = std::max(iv.start, since);
    const auto end = std::min(iv.end, until);
    if (start < end) out.push_back({iv.agent, iv.state, start, end});
  }
  return out;
}

MilliwattSeconds energy_of(const Occupancy& occupancy, const PowerModel& model) {
  MilliwattSeconds sum = 0;
  for (std::size_t i = 0; i < kEnergyStateCount; ++i) {
    sum += model.milliwatts(static_cast<EnergyState>(i)) * occupancy.seconds[i];
  }
  return sum;
}

void OccupancyAccumulator::add(const StateInterval& iv) {
  Timestamp t = iv.start;
  while (t < iv.end) {
    const Timestamp period_start = t - ((t % period_) + period_) % period_;
    const Timestamp period_end = period_start + period_;
    const Timestamp piece_end = std::min(iv.end, period_end);
    auto [it, fresh] = open_.try_emplace({period_start, iv.agent}, Occupancy{iv.agent, period_start, period_end, {}});
    it->second[iv.state] += piece_end - t;
    t = piece_end;
  }
}

std::vector<Occupancy> OccupancyAccumulator::flush(Timestamp t) {
  std::vector<Occupancy> out;
  for (auto it = open_.begin(); it != open_.end() && it->second.end <= t;) {
    auto occ = std::move(it->second);
    std::int64_t covered = 0;
    for (auto s : occ.seconds) covered += s;
    occ[EnergyState::kOff] += (occ.end - occ.start) - covered;
    out.push_back(std::move(occ));
    it = open_.erase(it);
  }
  return out;
}

void TimelineBuilder::track(const AgentId& agent, Timestamp start) {
  current_.try_emplace(agent, Current{EnergyState::kOff, start, std::nullopt});
}

void TimelineBuilder::settle(const AgentId& agent, Current& current, Timestamp t) {
  if (current.until && *current.until < t) {
    if (current.since < *current.until) done_.push_back({agent, current.state, current.since, *current.until});
    current = {EnergyState::kOff, std::max(current.since, *current.until), std::nullopt};
  }
}

void TimelineBuilder::transition(const AgentId& agent, EnergyState state, Timestamp at,
                                 std::optional<Timestamp> until) {
  auto [it, fresh] = current_.try_emplace(agent, Current{state, at, until});
  if (fresh) return;
  auto& current = it->second;
  at = std::max(at, current.since);
  settle(agent, current, at);
  if (current.state == state) {
    current.until = until;
    return;
  }
  if (current.since < at) done_.push_back({agent, current.state, current.since, at});
  current = {state, at, until};
}

void TimelineBuilder::heartbeat(const StatusEntry& entry, Timestamp observed_at) {
  const auto state = entry.status == Status::kIdle ? EnergyState::kIdle : EnergyState::kActive;
  transition(entry.agent, state, observed_at, observed_at + coverage_);
}

void TimelineBuilder::command_executed(const CommandEntry& command, Timestamp observed_at) {
  switch (command.kind) {
    case CommandKind::kShutdown:
    case CommandKind::kRestart: transition(command.target, EnergyState::kOff, observed_at, std::nullopt); break;
    case CommandKind::kHibernate: transition(command.target, EnergyState::kSleep, observed_at, std::nullopt); break;
    case CommandKind::kLogoff: break;
  }
}

std::vector<StateInterval> TimelineBuilder::advance_to(Timestamp t) {
  for (auto& [agent, current] : current_) {
    settle(agent, current, t);
    if (current.since < t) {
      done_.push_back({agent, current.state, current.since, t});
      current.since = t;
    }
  }
  auto out = std::move(done_);
  done_.clear();
  std::sort(out.begin(), out.end(), [](const StateInterval& a, const StateInterval& b) {
    return std::tie(a.start, a.agent) < std::tie(b.start, b.agent);
  });
  return out;
}

}  // namespace fleetwarden
