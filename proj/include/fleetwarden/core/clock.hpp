#pragma once

#include <atomic>
#include <cstdint>

namespace fleetwarden {

/// Wall-clock seconds since the Unix epoch (UTC).
using Timestamp = std::int64_t;

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Timestamp now() const = 0;
};

class SystemClock final : public Clock {
 public:
  Timestamp now() const override;
};

/// Manually driven clock for tests and the simulator.
class FakeClock final : public Clock {
 public:
  explicit FakeClock(Timestamp start = 0) : now_(start) {}

  Timestamp now() const override { return now_.load(std::memory_order_acquire); }
  void set(Timestamp t) { now_.store(t, std::memory_order_release); }
  void advance(std::int64_t seconds) { now_.fetch_add(seconds, std::memory_order_acq_rel); }

 private:
  std::atomic<Timestamp> now_;
};

}  // namespace fleetwarden
