#pragma once

#include "fleetwarden/agent/sources.hpp"
#include "fleetwarden/ledger/types.hpp"

#include <optional>
#include <vector>

namespace fleetwarden {

inline constexpr std::size_t kMaxReportedProcesses = 256;

struct ActivitySample {
  Timestamp sampled_at = 0;
  Timestamp last_input_at = 0;
  std::int64_t idle_seconds = 0;  // max(0, sampled_at - last_input_at)
  bool degraded = false;          // input source unavailable; reported as zero idle
};

ActivitySample sample_activity(Timestamp now, InputSource& input);

/// IDLE once the idle period has lasted at least the threshold. The paper's
/// "count reaches 0" wording is read as a countdown of `threshold_seconds`.
constexpr Status determine_status(std::int64_t idle_seconds, std::int64_t threshold_seconds) {
  return idle_seconds >= threshold_seconds ? Status::kIdle : Status::kBusy;
}

struct ProcessSample {
  std::vector<ProcessInfo> processes;
  bool degraded = false;
};

/// Deduplicated by pid (first occurrence wins), sorted by name, capped.
ProcessSample sample_processes(ProcessSource& source);
std::vector<ProcessInfo> normalize_processes(std::vector<ProcessInfo> raw);

struct TrafficSample {
  TrafficCounters counters;
  bool reset = false;
  bool degraded = false;
};

/// Remembers the previous reading to flag counter resets.
class TrafficSampler {
 public:
  TrafficSample sample(CounterSource& source);

 private:
  std::optional<TrafficCounters> previous_;
};

}  // namespace fleetwarden
