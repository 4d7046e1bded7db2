#pragma once

#include "fleetwarden/core/clock.hpp"
#include "fleetwarden/ledger/types.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace fleetwarden {

/// Time of the most recent keyboard/mouse event; nullopt when unobservable.
class InputSource {
 public:
  virtual ~InputSource() = default;
  virtual std::optional<Timestamp> last_input_at() = 0;
};

class ProcessSource {
 public:
  virtual ~ProcessSource() = default;
  virtual std::optional<std::vector<ProcessInfo>> processes() = 0;
};

/// Cumulative interface counters; nullopt when the source failed.
class CounterSource {
 public:
  virtual ~CounterSource() = default;
  virtual std::optional<TrafficCounters> counters() = 0;
};

struct AgentSources {
  InputSource& input;
  ProcessSource& processes;
  CounterSource& traffic;
};

// Linux backends -------------------------------------------------------------

/// Latest access time over terminal devices, the same signal `w` uses for
/// per-session idle time. Reports nothing when no terminal device exists.
class TerminalInputSource final : public InputSource {
 public:
  explicit TerminalInputSource(std::vector<std::filesystem::path> roots = {"/dev/pts", "/dev"});
  std::optional<Timestamp> last_input_at() override;

 private:
  std::vector<std::filesystem::path> roots_;
};

class ProcfsProcessSource final : public ProcessSource {
 public:
  explicit ProcfsProcessSource(std::filesystem::path proc_root = "/proc") : root_(std::move(proc_root)) {}
  std::optional<std::vector<ProcessInfo>> processes() override;

 private:
  std::filesystem::path root_;
};

/// Sums every interface in /proc/net/dev except loopback.
class ProcNetDevCounterSource final : public CounterSource {
 public:
  explicit ProcNetDevCounterSource(std::filesystem::path path = "/proc/net/dev") : path_(std::move(path)) {}
  std::optional<TrafficCounters> counters() override;

 private:
  std::filesystem::path path_;
};

/// Parses /proc/net/dev text; exposed for tests.
std::optional<TrafficCounters> parse_net_dev(std::string_view text);

}  // namespace fleetwarden
