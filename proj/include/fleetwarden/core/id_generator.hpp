#pragma once

#include <cstdint>
#include <mutex>
#include <random>
#include <string>

namespace fleetwarden {

/// Produces opaque unique identifiers (command ids). Seeded instances are
/// deterministic, which the simulator relies on.
class IdGenerator {
 public:
  IdGenerator();
  explicit IdGenerator(std::uint64_t seed);

  std::string next(std::string_view prefix = "cmd");

 private:
  std::mutex mutex_;
  std::mt19937_64 rng_;
  std::uint64_t counter_ = 0;
};

}  // namespace fleetwarden
