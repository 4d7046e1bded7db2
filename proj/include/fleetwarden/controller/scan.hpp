#pragma once

#include <chrono>
#include <cstdint>
#include <mutex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace fleetwarden {

/// Contiguous IPv4 range: "a.b.c.d", "a.b.c.d/n" (network and broadcast
/// excluded for n <= 30) or "a.b.c.d-e.f.g.h" (inclusive).
class AddressRange {
 public:
  static constexpr std::uint64_t kMaxAddresses = 1u << 16;

  static AddressRange parse(std::string_view text);  // throws Error(kParse)
  static AddressRange empty() { return {}; }

  std::uint64_t size() const { return count_; }
  std::vector<std::string> addresses() const;

 private:
  std::uint32_t first_ = 0;
  std::uint64_t count_ = 0;
};

std::string format_ipv4(std::uint32_t address);
std::uint32_t parse_ipv4(std::string_view text);  // throws Error(kParse)

/// Answers whether a host responds. Timeouts count as dead.
class Prober {
 public:
  virtual ~Prober() = default;
  virtual bool alive(const std::string& address) = 0;
};

class FixtureProber final : public Prober {
 public:
  explicit FixtureProber(std::set<std::string> alive = {}) : alive_(std::move(alive)) {}
  bool alive(const std::string& address) override;
  void set_alive(const std::string& address, bool up);

 private:
  std::mutex mutex_;
  std::set<std::string> alive_;
};

/// A host is alive if a TCP connect to `port` is accepted or actively
/// refused (either way something answered).
class TcpProber final : public Prober {
 public:
  TcpProber(std::uint16_t port, std::chrono::milliseconds timeout) : port_(port), timeout_(timeout) {}
  bool alive(const std::string& address) override;

 private:
  std::uint16_t port_;
  std::chrono::milliseconds timeout_;
};

/// Responding addresses in numeric order.
std::vector<std::string> scan_network(const AddressRange& range, Prober& prober);

}  // namespace fleetwarden
