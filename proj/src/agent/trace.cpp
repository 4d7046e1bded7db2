#include "fleetwarden/agent/trace.hpp"

#include "fleetwarden/core/error.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace fleetwarden {

namespace {

[[noreturn]] void parse_error(std::size_t line_no, const std::string& what) {
  throw Error(ErrorCode::kParse, "trace line " + std::to_string(line_no) + ": " + what);
}

template <typename T>
T parse_number(const std::string& token, std::size_t line_no, const char* what) {
  try {
    std::size_t used = 0;
    long long v = std::stoll(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return static_cast<T>(v);
  } catch (const std::exception&) {
    parse_error(line_no, std::string("bad ") + what + " '" + token + "'");
  }
}

std::uint64_t parse_counter(const std::string& token, std::size_t line_no) {
  const auto v = parse_number<long long>(token, line_no, "counter");
  if (v < 0) parse_error(line_no, "negative counter");
  return static_cast<std::uint64_t>(v);
}

}  // namespace

ActivityTrace ActivityTrace::parse(std::string_view text) {
  ActivityTrace trace;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  std::int64_t last_t = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::vector<std::string> tok;
    for (std::string t; fields >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok.size() < 2) parse_error(line_no, "expected '<t> <event> ...'");
    const auto t = parse_number<std::int64_t>(tok[0], line_no, "time");
    if (t < 0) parse_error(line_no, "negative time");
    if (t < last_t) parse_error(line_no, "time goes backwards");
    last_t = t;

    if (tok[1] == "input") {
      if (tok.size() != 2) parse_error(line_no, "input takes no arguments");
      trace.inputs.push_back(t);
    } else if (tok[1] == "proc") {
      if (tok.size() != 4 && tok.size() != 5) parse_error(line_no, "expected 'proc <name> <pid> [<memory_kb>]'");
      ProcessInfo p{tok[2], parse_number<std::int64_t>(tok[3], line_no, "pid"), 0};
      if (p.pid <= 0) parse_error(line_no, "pid must be positive");
      if (tok.size() == 5) p.memory_kb = parse_number<std::int64_t>(tok[4], line_no, "memory_kb");
      if (trace.snapshots.empty() || trace.snapshots.back().at != t) trace.snapshots.push_back({t, {}});
      trace.snapshots.back().processes.push_back(std::move(p));
    } else if (tok[1] == "traffic") {
      if (tok.size() != 4 && tok.size() != 6) {
        parse_error(line_no, "expected 'traffic <rx> <tx> [<rx_packets> <tx_packets>]'");
      }
      TrafficCounters c{parse_counter(tok[2], line_no), parse_counter(tok[3], line_no), 0, 0};
      if (tok.size() == 6) {
        c.rx_packets = parse_counter(tok[4], line_no);
        c.tx_packets = parse_counter(tok[5], line_no);
      }
      trace.traffic.push_back({t, c});
    } else {
      parse_error(line_no, "unknown event '" + tok[1] + "'");
    }
  }
  return trace;
}

ActivityTrace ActivityTrace::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot open trace " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string ActivityTrace::format() const {
  // Merge the three event lists back into time order.
  struct Line {
    std::int64_t at;
    int order;
    std::string text;
  };
  std::vector<Line> lines;
  for (auto t : inputs) lines.push_back({t, 0, std::to_string(t) + " input"});
  for (const auto& s : snapshots) {
    for (const auto& p : s.processes) {
      lines.push_back({s.at, 1,
                       std::to_string(s.at) + " proc " + p.name + " " + std::to_string(p.pid) + " " +
                           std::to_string(p.memory_kb)});
    }
  }
  for (const auto& r : traffic) {
    lines.push_back({r.at, 2,
                     std::to_string(r.at) + " traffic " + std::to_string(r.counters.rx_bytes) + " " +
                         std::to_string(r.counters.tx_bytes) + " " + std::to_string(r.counters.rx_packets) + " " +
                         std::to_string(r.counters.tx_packets)});
  }
  std::stable_sort(lines.begin(), lines.end(),
                   [](const Line& a, const Line& b) { return std::tie(a.at, a.order) < std::tie(b.at, b.order); });
  std::string out;
  for (const auto& l : lines) out += l.text + "\n";
  return out;
}

std::optional<std::int64_t> ActivityTrace::last_input_at(std::int64_t t) const {
  auto it = std::upper_bound(inputs.begin(), inputs.end(), t);
  if (it == inputs.begin()) return std::nullopt;
  return *std::prev(it);
}

std::vector<ProcessInfo> ActivityTrace::processes_at(std::int64_t t) const {
  auto it = std::upper_bound(snapshots.begin(), snapshots.end(), t,
                             [](std::int64_t v, const ProcessSnapshot& s) { return v < s.at; });
  if (it == snapshots.begin()) return {};
  return std::prev(it)->processes;
}

TrafficCounters ActivityTrace::traffic_at(std::int64_t t) const {
  auto it = std::upper_bound(traffic.begin(), traffic.end(), t,
                             [](std::int64_t v, const TrafficReading& r) { return v < r.at; });
  if (it == traffic.begin()) return {};
  return std::prev(it)->counters;
}

std::int64_t ActivityTrace::end_time() const {
  std::int64_t end = 0;
  if (!inputs.empty()) end = std::max(end, inputs.back());
  if (!snapshots.empty()) end = std::max(end, snapshots.back().at);
  if (!traffic.empty()) end = std::max(end, traffic.back().at);
  return end;
}

// ---------------------------------------------------------------------------

ScriptedSources::ScriptedSources(const ActivityTrace& trace, const Clock& clock, Timestamp origin)
    : trace_(trace), clock_(clock), origin_(origin) {}

std::optional<Timestamp> ScriptedSources::last_input_at() {
  if (!input_available_) return std::nullopt;
  // Before the first scripted input the machine has been untouched since the origin.
  const auto last = trace_.last_input_at(clock_.now() - origin_);
  return origin_ + last.value_or(0);
}

std::optional<std::vector<ProcessInfo>> ScriptedSources::processes() {
  return trace_.processes_at(clock_.now() - origin_);
}

std::optional<TrafficCounters> ScriptedSources::counters() {
  auto c = trace_.traffic_at(clock_.now() - origin_);
  auto sub = [](std::uint64_t v, std::uint64_t base) { return v >= base ? v - base : 0; };
  return TrafficCounters{sub(c.rx_bytes, baseline_.rx_bytes), sub(c.tx_bytes, baseline_.tx_bytes),
                         sub(c.rx_packets, baseline_.rx_packets), sub(c.tx_packets, baseline_.tx_packets)};
}

void ScriptedSources::reset_counters() { baseline_ = trace_.traffic_at(clock_.now() - origin_); }

}  // namespace fleetwarden
