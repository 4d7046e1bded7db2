#include "fleetwarden/core/id_generator.hpp"

#include <cstdio>

namespace fleetwarden {

IdGenerator::IdGenerator() : rng_(std::random_device{}()) {}

IdGenerator::IdGenerator(std::uint64_t seed) : rng_(seed) {}

std::string IdGenerator::next(std::string_view prefix) {
  std::lock_guard lock(mutex_);
  // The counter keeps ids unique even if the random part collides.
  const std::uint64_t r = rng_();
  char buf[48];
  std::snprintf(buf, sizeof buf, "-%012llx-%llu", static_cast<unsigned long long>(r & 0xffffffffffffULL),
                static_cast<unsigned long long>(++counter_));
  return std::string(prefix) + buf;
}

}  // namespace fleetwarden
