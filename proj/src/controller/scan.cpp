#include "fleetwarden/controller/scan.hpp"

#include "fleetwarden/core/error.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>

namespace fleetwarden {

std::string format_ipv4(std::uint32_t address) {
  return std::to_string(address >> 24) + "." + std::to_string((address >> 16) & 0xff) + "." +
         std::to_string((address >> 8) & 0xff) + "." + std::to_string(address & 0xff);
}

std::uint32_t parse_ipv4(std::string_view text) {
  in_addr addr{};
  const std::string s(text);
  if (::inet_pton(AF_INET, s.c_str(), &addr) != 1) throw Error(ErrorCode::kParse, "not an IPv4 address: " + s);
  return ntohl(addr.s_addr);
}

AddressRange AddressRange::parse(std::string_view text) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (text.empty()) throw Error(ErrorCode::kParse, "empty address range");
  AddressRange range;
  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    const auto base = parse_ipv4(text.substr(0, slash));
    const std::string bits_text(text.substr(slash + 1));
    int bits = -1;
    try {
      std::size_t used = 0;
      bits = std::stoi(bits_text, &used);
      if (used != bits_text.size()) bits = -1;
    } catch (const std::exception&) {
    }
    if (bits < 0 || bits > 32) throw Error(ErrorCode::kParse, "bad prefix length in " + std::string(text));
    const std::uint64_t block = 1ull << (32 - bits);
    const auto mask = bits == 0 ? 0u : static_cast<std::uint32_t>(~0u << (32 - bits));
    range.first_ = base & mask;
    range.count_ = block;
    if (bits <= 30) {
      ++range.first_;
      range.count_ -= 2;
    }
  } else if (auto dash = text.find('-'); dash != std::string_view::npos) {
    const auto lo = parse_ipv4(text.substr(0, dash));
    const auto hi = parse_ipv4(text.substr(dash + 1));
    if (hi < lo) throw Error(ErrorCode::kParse, "inverted address range " + std::string(text));
    range.first_ = lo;
    range.count_ = static_cast<std::uint64_t>(hi) - lo + 1;
  } else {
    range.first_ = parse_ipv4(text);
    range.count_ = 1;
  }
  if (range.count_ > kMaxAddresses) throw Error(ErrorCode::kParse, "address range too large: " + std::string(text));
  return range;
}

std::vector<std::string> AddressRange::addresses() const {
  std::vector<std::string> out;
  out.reserve(count_);
  for (std::uint64_t i = 0; i < count_; ++i) out.push_back(format_ipv4(static_cast<std::uint32_t>(first_ + i)));
  return out;
}

bool FixtureProber::alive(const std::string& address) {
  std::lock_guard lock(mutex_);
  return alive_.contains(address);
}

void FixtureProber::set_alive(const std::string& address, bool up) {
  std::lock_guard lock(mutex_);
  if (up) {
    alive_.insert(address);
  } else {
    alive_.erase(address);
  }
}

bool TcpProber::alive(const std::string& address) {
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(port_);
  if (::inet_pton(AF_INET, address.c_str(), &sa.sin_addr) != 1) return false;
  const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_NONBLOCK | SOCK_CLOEXEC, 0);
  if (fd < 0) return false;
  bool up = false;
  if (::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof sa) == 0) {
    up = true;
  } else if (errno == ECONNREFUSED) {
    up = true;
  } else if (errno == EINPROGRESS) {
    pollfd pfd{fd, POLLOUT, 0};
    if (::poll(&pfd, 1, static_cast<int>(timeout_.count())) == 1) {
      int err = 0;
      socklen_t len = sizeof err;
      ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
      up = err == 0 || err == ECONNREFUSED;
    }
  }
  ::close(fd);
  return up;
}

std::vector<std::string> scan_network(const AddressRange& range, Prober& prober) {
  // addresses() is already in numeric order.
  std::vector<std::string> found;
  for (auto& address : range.addresses()) {
    if (prober.alive(address)) found.push_back(std::move(address));
  }
  return found;
}

}  // namespace fleetwarden
