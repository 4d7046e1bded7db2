#include "fleetwarden/core/clock.hpp"

#include <chrono>

namespace fleetwarden {

Timestamp SystemClock::now() const {
  using namespace std::chrono;
  return duration_cast<seconds>(system_clock::now().time_since_epoch()).count();
}

}  // namespace fleetwarden
