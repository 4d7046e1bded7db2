#include "fleetwarden/controller/fleet_view.hpp"

#include <arpa/inet.h>

#include <algorithm>
#include <cctype>

namespace fleetwarden {

namespace {

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::string_view to_string(DisplayClass c) {
  switch (c) {
    case DisplayClass::kCrt: return "CRT";
    case DisplayClass::kLcd: return "LCD";
    case DisplayClass::kOther: return "OTHER";
  }
  return "OTHER";
}

std::optional<DisplayClass> parse_display_class(std::string_view text) {
  const auto l = lower(text);
  if (l == "crt") return DisplayClass::kCrt;
  if (l == "lcd") return DisplayClass::kLcd;
  if (l == "other") return DisplayClass::kOther;
  return std::nullopt;
}

std::string default_power_model(DisplayClass c) {
  switch (c) {
    case DisplayClass::kCrt: return "crt";
    case DisplayClass::kLcd: return "lcd";
    case DisplayClass::kOther: return "other";
  }
  return "other";
}

bool is_valid_address(std::string_view address) {
  const std::string a(address);
  unsigned char buf[16];
  return ::inet_pton(AF_INET, a.c_str(), buf) == 1 || ::inet_pton(AF_INET6, a.c_str(), buf) == 1;
}

std::string_view to_string(Liveness l) {
  switch (l) {
    case Liveness::kActive: return "ACTIVE";
    case Liveness::kStale: return "STALE";
    case Liveness::kOffline: return "OFFLINE";
  }
  return "OFFLINE";
}

std::string_view to_string(AckStatus s) { return s == AckStatus::kAcknowledged ? "ACKNOWLEDGED" : "AWAITING"; }

Liveness liveness_of(const std::optional<StatusEntry>& latest, Timestamp now, const LivenessWindows& windows) {
  if (!latest) return Liveness::kOffline;
  const auto age = now - latest->timestamp;
  if (age < windows.stale_seconds) return Liveness::kActive;
  if (age < windows.offline_seconds) return Liveness::kStale;
  return Liveness::kOffline;
}

bool glob_match(std::string_view pattern, std::string_view text) {
  // Iterative wildcard match with single-star backtracking.
  auto eq = [](char a, char b) {
    return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
  };
  std::size_t p = 0;
  std::size_t t = 0;
  std::size_t star = std::string_view::npos;
  std::size_t mark = 0;
  while (t < text.size()) {
    if (p < pattern.size() && (pattern[p] == '?' || (pattern[p] != '*' && eq(pattern[p], text[t])))) {
      ++p;
      ++t;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      mark = t;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      t = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

Watchlist::Watchlist(std::vector<std::string> patterns) {
  for (auto& p : patterns) {
    if (p.empty()) continue;
    auto l = lower(p);
    if (std::find(patterns_.begin(), patterns_.end(), l) == patterns_.end()) patterns_.push_back(std::move(l));
  }
}

bool Watchlist::matches(std::string_view process_name) const {
  return std::any_of(patterns_.begin(), patterns_.end(),
                     [&](const std::string& p) { return glob_match(p, process_name); });
}

std::vector<std::string> detect_suspicious(const std::vector<ProcessInfo>& processes, const Watchlist& watchlist) {
  std::vector<std::string> hits;
  for (const auto& p : processes) {
    if (watchlist.matches(p.name)) hits.push_back(p.name);
  }
  std::sort(hits.begin(), hits.end());
  hits.erase(std::unique(hits.begin(), hits.end()), hits.end());
  return hits;
}

const FleetRow* FleetView::find(const AgentId& agent) const {
  auto it = std::find_if(rows.begin(), rows.end(), [&](const FleetRow& r) { return r.machine.agent == agent; });
  return it == rows.end() ? nullptr : &*it;
}

FleetView fleet_view(const std::vector<MachineRecord>& registry, const std::map<AgentId, StatusEntry>& latest,
                     const Watchlist& watchlist, Timestamp now, const LivenessWindows& windows) {
  FleetView view;
  view.at = now;
  view.rows.reserve(registry.size());
  for (const auto& machine : registry) {
    FleetRow row{machine};
    if (auto it = latest.find(machine.agent); it != latest.end()) {
      row.latest = it->second;
      row.machine.last_seen = std::min(it->second.timestamp, now);
      row.suspicious = detect_suspicious(it->second.processes, watchlist);
    }
    row.liveness = liveness_of(row.latest, now, windows);
    view.rows.push_back(std::move(row));
  }
  std::sort(view.rows.begin(), view.rows.end(),
            [](const FleetRow& a, const FleetRow& b) { return a.machine.agent < b.machine.agent; });
  return view;
}

AckStatus confirm_acknowledgement(const FleetView& before, const FleetView& after, const AgentId& agent,
                                  const CommandEntry& command) {
  if (command.state != CommandState::kExecuted || command.target != agent) return AckStatus::kAwaiting;
  const auto* now_row = after.find(agent);
  if (!now_row) return AckStatus::kAwaiting;
  switch (command.kind) {
    case CommandKind::kLogoff:
      return AckStatus::kAcknowledged;
    case CommandKind::kShutdown:
    case CommandKind::kHibernate:
      return now_row->liveness != Liveness::kActive ? AckStatus::kAcknowledged : AckStatus::kAwaiting;
    case CommandKind::kRestart: {
      if (!now_row->latest) return AckStatus::kAwaiting;
      const auto* was = before.find(agent);
      const bool had_earlier_boot = was && was->latest && was->latest->boot < now_row->latest->boot;
      const bool fresh_boot = had_earlier_boot || (now_row->latest->seq == 0 && now_row->latest->boot >= command.issued_at);
      return fresh_boot ? AckStatus::kAcknowledged : AckStatus::kAwaiting;
    }
  }
  return AckStatus::kAwaiting;
}

}  // namespace fleetwarden
