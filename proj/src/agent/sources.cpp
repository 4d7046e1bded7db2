#include "fleetwarden/agent/sources.hpp"

#include <sys/stat.h>

#include <cctype>
#include <fstream>
#include <sstream>

namespace fleetwarden {

namespace fs = std::filesystem;

namespace {

bool is_terminal_name(const std::string& name, bool in_pts) {
  if (in_pts) return !name.empty() && std::isdigit(static_cast<unsigned char>(name[0]));
  // /dev/tty1..N are the virtual consoles.
  return name.size() > 3 && name.compare(0, 3, "tty") == 0 && std::isdigit(static_cast<unsigned char>(name[3]));
}

bool all_digits(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

}  // namespace

TerminalInputSource::TerminalInputSource(std::vector<fs::path> roots) : roots_(std::move(roots)) {}

std::optional<Timestamp> TerminalInputSource::last_input_at() {
  std::optional<Timestamp> latest;
  for (const auto& root : roots_) {
    const bool in_pts = root.filename() == "pts";
    std::error_code ec;
    for (fs::directory_iterator it(root, ec), end; !ec && it != end; it.increment(ec)) {
      const auto name = it->path().filename().string();
      if (!is_terminal_name(name, in_pts)) continue;
      struct stat st {};
      if (::stat(it->path().c_str(), &st) != 0) continue;
      const Timestamp atime = st.st_atim.tv_sec;
      if (!latest || atime > *latest) latest = atime;
    }
  }
  return latest;
}

std::optional<std::vector<ProcessInfo>> ProcfsProcessSource::processes() {
  std::error_code ec;
  fs::directory_iterator it(root_, ec);
  if (ec) return std::nullopt;
  std::vector<ProcessInfo> out;
  for (fs::directory_iterator end; it != end; it.increment(ec)) {
    if (ec) break;
    const auto pid_text = it->path().filename().string();
    if (!all_digits(pid_text)) continue;
    std::ifstream comm(it->path() / "comm");
    std::string name;
    if (!comm || !std::getline(comm, name) || name.empty()) continue;  // raced with exit
    ProcessInfo info{name, std::stoll(pid_text), 0};
    std::ifstream status(it->path() / "status");
    for (std::string line; std::getline(status, line);) {
      if (line.rfind("VmRSS:", 0) == 0) {
        std::istringstream fields(line.substr(6));
        fields >> info.memory_kb;
        break;
      }
    }
    out.push_back(std::move(info));
  }
  return out;
}

std::optional<TrafficCounters> parse_net_dev(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  TrafficCounters total;
  bool any = false;
  while (std::getline(in, line)) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;  // header lines
    std::string iface = line.substr(0, colon);
    iface.erase(0, iface.find_first_not_of(' '));
    if (iface == "lo") continue;
    std::istringstream fields(line.substr(colon + 1));
    std::uint64_t v[16] = {};
    for (auto& x : v) {
      if (!(fields >> x)) return std::nullopt;
    }
    // Receive: bytes packets errs drop fifo frame compressed multicast; transmit likewise.
    total.rx_bytes += v[0];
    total.rx_packets += v[1];
    total.tx_bytes += v[8];
    total.tx_packets += v[9];
    any = true;
  }
  if (!any) return TrafficCounters{};
  return total;
}

std::optional<TrafficCounters> ProcNetDevCounterSource::counters() {
  std::ifstream in(path_);
  if (!in) return std::nullopt;
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_net_dev(buf.str());
}

}  // namespace fleetwarden
