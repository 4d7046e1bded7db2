#pragma once

#include "fleetwarden/agent/sources.hpp"
#include "fleetwarden/core/clock.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace fleetwarden {

/// Scripted machine activity. Text form, one event per line:
///   <t> input
///   <t> proc <name> <pid> [<memory_kb>]
///   <t> traffic <rx_bytes> <tx_bytes> [<rx_packets> <tx_packets>]
/// Times are seconds relative to the trace origin and must not decrease.
/// All `proc` lines sharing a time form one process-table snapshot.
struct ActivityTrace {
  struct ProcessSnapshot {
    std::int64_t at = 0;
    std::vector<ProcessInfo> processes;
  };
  struct TrafficReading {
    std::int64_t at = 0;
    TrafficCounters counters;
  };

  std::vector<std::int64_t> inputs;
  std::vector<ProcessSnapshot> snapshots;
  std::vector<TrafficReading> traffic;

  static ActivityTrace parse(std::string_view text);  // throws Error(kParse) with line number
  static ActivityTrace load(const std::string& path);
  std::string format() const;

  /// Last input at or before `t`, if any.
  std::optional<std::int64_t> last_input_at(std::int64_t t) const;
  std::vector<ProcessInfo> processes_at(std::int64_t t) const;
  TrafficCounters traffic_at(std::int64_t t) const;
  std::int64_t end_time() const;
};

/// Sources replaying a trace against a clock. Trace time 0 maps to `origin`.
class ScriptedSources final : public InputSource, public ProcessSource, public CounterSource {
 public:
  ScriptedSources(const ActivityTrace& trace, const Clock& clock, Timestamp origin);

  std::optional<Timestamp> last_input_at() override;
  std::optional<std::vector<ProcessInfo>> processes() override;
  std::optional<TrafficCounters> counters() override;

  /// Models a reboot: counters restart from zero at the current time.
  void reset_counters();
  /// Makes the input source report nothing (hook unavailable).
  void set_input_available(bool available) { input_available_ = available; }

  AgentSources sources() { return {*this, *this, *this}; }

 private:
  const ActivityTrace& trace_;
  const Clock& clock_;
  Timestamp origin_;
  TrafficCounters baseline_;
  bool input_available_ = true;
};

}  // namespace fleetwarden
