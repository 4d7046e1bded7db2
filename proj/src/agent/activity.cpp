#include "fleetwarden/agent/activity.hpp"

#include <algorithm>
#include <unordered_set>

namespace fleetwarden {

ActivitySample sample_activity(Timestamp now, InputSource& input) {
  const auto last = input.last_input_at();
  if (!last) return {now, now, 0, true};
  return {now, *last, std::max<std::int64_t>(0, now - *last), false};
}

std::vector<ProcessInfo> normalize_processes(std::vector<ProcessInfo> raw) {
  std::vector<ProcessInfo> out;
  out.reserve(raw.size());
  std::unordered_set<std::int64_t> seen;
  for (auto& p : raw) {
    if (p.name.empty() || p.pid <= 0) continue;
    if (!seen.insert(p.pid).second) continue;
    p.memory_kb = std::max<std::int64_t>(0, p.memory_kb);
    out.push_back(std::move(p));
  }
  std::stable_sort(out.begin(), out.end(), [](const ProcessInfo& a, const ProcessInfo& b) {
    return a.name != b.name ? a.name < b.name : a.pid < b.pid;
  });
  if (out.size() > kMaxReportedProcesses) out.resize(kMaxReportedProcesses);
  return out;
}

ProcessSample sample_processes(ProcessSource& source) {
  auto raw = source.processes();
  if (!raw) return {{}, true};
  return {normalize_processes(std::move(*raw)), false};
}

TrafficSample TrafficSampler::sample(CounterSource& source) {
  const auto current = source.counters();
  if (!current) return {previous_.value_or(TrafficCounters{}), false, true};
  bool reset = false;
  if (previous_) {
    reset = current->rx_bytes < previous_->rx_bytes || current->tx_bytes < previous_->tx_bytes ||
            current->rx_packets < previous_->rx_packets || current->tx_packets < previous_->tx_packets;
  }
  previous_ = current;
  return {*current, reset, false};
}

}  // namespace fleetwarden
