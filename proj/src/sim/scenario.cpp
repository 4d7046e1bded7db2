#include "fleetwarden/sim/scenario.hpp"

#include "fleetwarden/core/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace fleetwarden {
namespace {

constexpr std::pair<AdminKind, std::string_view> kAdminNames[] = {
    {AdminKind::kStartup, "startup"}, {AdminKind::kScan, "scan"},         {AdminKind::kView, "view"},
    {AdminKind::kDetail, "detail"},   {AdminKind::kIssue, "issue"},       {AdminKind::kAck, "ack"},
    {AdminKind::kRegister, "register"}, {AdminKind::kQuarantine, "quarantine"},
};

bool needs_agent(AdminKind k) {
  return k == AdminKind::kDetail || k == AdminKind::kIssue || k == AdminKind::kAck || k == AdminKind::kRegister ||
         k == AdminKind::kQuarantine;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot read " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::string lab_address(std::size_t subnet, std::size_t index) {
  return "10." + std::to_string(subnet) + "." + std::to_string(index / 250) + "." + std::to_string(index % 250 + 1);
}

template <typename T>
T pick(std::mt19937_64& rng, T lo, T hi) {
  return std::uniform_int_distribution<T>(lo, hi)(rng);
}

// Inputs every 10..300 s from `from`, the last one exactly at `to`.
void add_inputs(ActivityTrace& trace, std::mt19937_64& rng, std::int64_t from, std::int64_t to) {
  for (std::int64_t t = from; t < to; t += pick<std::int64_t>(rng, 10, 300)) trace.inputs.push_back(t);
  trace.inputs.push_back(to);
}

void add_background(ActivityTrace& trace, std::mt19937_64& rng, std::int64_t duration,
                    std::vector<ProcessInfo> processes) {
  trace.snapshots.push_back({0, std::move(processes)});
  TrafficCounters counters;
  for (std::int64_t t = 0; t <= duration; t += 60) {
    counters.rx_bytes += pick<std::uint64_t>(rng, 1'000, 2'000'000);
    counters.tx_bytes += pick<std::uint64_t>(rng, 1'000, 500'000);
    counters.rx_packets += pick<std::uint64_t>(rng, 10, 2'000);
    counters.tx_packets += pick<std::uint64_t>(rng, 10, 1'000);
    trace.traffic.push_back({t, counters});
  }
}

std::vector<ProcessInfo> desktop_processes(std::mt19937_64& rng) {
  static const char* const kCommon[] = {"explorer.exe", "svchost.exe", "winword.exe", "excel.exe", "chrome.exe",
                                        "outlook.exe", "notepad.exe", "acrord32.exe"};
  std::vector<ProcessInfo> out;
  std::int64_t pid = pick<std::int64_t>(rng, 100, 900);
  for (const char* name : kCommon) {
    if (rng() % 3 == 0) continue;
    out.push_back({name, pid, pick<std::int64_t>(rng, 2'000, 400'000)});
    pid += pick<std::int64_t>(rng, 1, 200);
  }
  return out;
}

}  // namespace

std::string_view to_string(AdminKind k) {
  for (const auto& [kind, name] : kAdminNames) {
    if (kind == k) return name;
  }
  return "unknown";
}

std::optional<AdminKind> parse_admin_kind(std::string_view text) {
  for (const auto& [kind, name] : kAdminNames) {
    if (name == text) return kind;
  }
  return std::nullopt;
}

void Scenario::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kValidation, "scenario: " + what); };
  if (duration_seconds < 0) fail("duration_seconds must be >= 0");
  if (heartbeat_period_seconds < 1 || poll_period_seconds < 1 || tick_period_seconds < 1) {
    fail("periods must be >= 1");
  }
  if (idle_threshold_seconds < 60) fail("idle_threshold_seconds must be >= 60");
  if (command_expiry_seconds < 1 || summary_period_seconds < 1) fail("expiry and summary periods must be >= 1");
  policy.validate();

  std::set<AgentId> agents;
  std::set<std::string> addresses;
  for (const auto& m : machines) {
    if (!agents.insert(m.agent).second) fail("duplicate machine " + m.agent.str());
    if (!is_valid_address(m.address)) fail("bad address for " + m.agent.str() + ": " + m.address);
    if (!addresses.insert(m.address).second) fail("duplicate address " + m.address);
    if (m.power_on_at < 0) fail("power_on_at must be >= 0 for " + m.agent.str());
    if (m.restart_delay_seconds < 1) fail("restart_delay_seconds must be >= 1 for " + m.agent.str());
  }

  std::int64_t previous = 0;
  for (std::size_t i = 0; i < timeline.size(); ++i) {
    const auto& a = timeline[i];
    const auto where = "timeline[" + std::to_string(i) + "]";
    if (a.at < previous) fail(where + " is out of order");
    if (a.at > duration_seconds) fail(where + " is after the end of the scenario");
    previous = a.at;
    if (needs_agent(a.kind)) {
      if (!a.agent) fail(where + " needs an agent");
      if (!agents.contains(*a.agent)) fail(where + " names unknown machine " + a.agent->str());
    }
    if (a.kind == AdminKind::kIssue && !a.command) fail(where + " needs a command");
    if (a.kind == AdminKind::kScan && a.range.empty()) fail(where + " needs a range");
  }
}

Scenario scenario_from_json(const nlohmann::json& doc, const std::string& base_dir) {
  if (!doc.is_object()) throw Error(ErrorCode::kParse, "scenario must be a JSON object");
  Scenario s;
  try {
    s.name = doc.value("name", "");
    s.seed = doc.value("seed", std::uint64_t{0});
    s.start = doc.value("start", s.start);
    s.duration_seconds = doc.value("duration_seconds", s.duration_seconds);
    s.heartbeat_period_seconds = doc.value("heartbeat_period_seconds", s.heartbeat_period_seconds);
    s.poll_period_seconds = doc.value("poll_period_seconds", s.poll_period_seconds);
    s.tick_period_seconds = doc.value("tick_period_seconds", s.tick_period_seconds);
    s.idle_threshold_seconds = doc.value("idle_threshold_seconds", s.idle_threshold_seconds);
    s.command_expiry_seconds = doc.value("command_expiry_seconds", s.command_expiry_seconds);
    s.summary_period_seconds = doc.value("summary_period_seconds", s.summary_period_seconds);
    s.watchlist = doc.value("watchlist", std::vector<std::string>{});
    if (doc.contains("policy")) {
      s.policy = policy_config_from_json(doc.at("policy"));
    } else {
      s.policy.enabled = false;
    }

    for (const auto& m : doc.value("machines", nlohmann::json::array())) {
      MachineSpec spec{.agent = AgentId::parse(m.at("agent").get<std::string>())};
      spec.address = m.at("address").get<std::string>();
      const auto cls = m.value("display_class", "OTHER");
      const auto parsed = parse_display_class(cls);
      if (!parsed) throw Error(ErrorCode::kValidation, "unknown display_class " + cls);
      spec.display_class = *parsed;
      if (m.contains("trace_path")) {
        const auto path = (std::filesystem::path(base_dir) / m.at("trace_path").get<std::string>()).string();
        spec.trace = ActivityTrace::parse(read_file(path));
      } else {
        spec.trace = ActivityTrace::parse(m.value("trace", ""));
      }
      spec.power_on_at = m.value("power_on_at", spec.power_on_at);
      spec.restart_delay_seconds = m.value("restart_delay_seconds", spec.restart_delay_seconds);
      spec.registered = m.value("registered", spec.registered);
      s.machines.push_back(std::move(spec));
    }

    for (const auto& a : doc.value("timeline", nlohmann::json::array())) {
      AdminAction action;
      action.at = a.at("at").get<std::int64_t>();
      const auto name = a.at("action").get<std::string>();
      const auto kind = parse_admin_kind(name);
      if (!kind) throw Error(ErrorCode::kValidation, "unknown admin action " + name);
      action.kind = *kind;
      if (a.contains("agent")) action.agent = AgentId::parse(a.at("agent").get<std::string>());
      if (a.contains("command")) {
        const auto text = a.at("command").get<std::string>();
        action.command = parse_command_kind(text);
        if (!action.command) throw Error(ErrorCode::kValidation, "unknown command " + text);
      }
      action.range = a.value("range", "");
      action.on = a.value("on", true);
      s.timeline.push_back(std::move(action));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("scenario: ") + e.what());
  }
  s.validate();
  return s;
}

nlohmann::json scenario_to_json(const Scenario& s) {
  nlohmann::json doc = {{"name", s.name},
                        {"seed", s.seed},
                        {"start", s.start},
                        {"duration_seconds", s.duration_seconds},
                        {"heartbeat_period_seconds", s.heartbeat_period_seconds},
                        {"poll_period_seconds", s.poll_period_seconds},
                        {"tick_period_seconds", s.tick_period_seconds},
                        {"idle_threshold_seconds", s.idle_threshold_seconds},
                        {"command_expiry_seconds", s.command_expiry_seconds},
                        {"summary_period_seconds", s.summary_period_seconds},
                        {"watchlist", s.watchlist}};
  if (s.policy.enabled) doc["policy"] = policy_config_to_json(s.policy);
  auto& machines = doc["machines"] = nlohmann::json::array();
  for (const auto& m : s.machines) {
    nlohmann::json entry = {{"agent", m.agent.str()},
                            {"address", m.address},
                            {"display_class", std::string(to_string(m.display_class))},
                            {"trace", m.trace.format()}};
    if (m.power_on_at != 0) entry["power_on_at"] = m.power_on_at;
    if (m.restart_delay_seconds != 30) entry["restart_delay_seconds"] = m.restart_delay_seconds;
    if (!m.registered) entry["registered"] = false;
    machines.push_back(std::move(entry));
  }
  auto& timeline = doc["timeline"] = nlohmann::json::array();
  for (const auto& a : s.timeline) {
    nlohmann::json entry = {{"at", a.at}, {"action", std::string(to_string(a.kind))}};
    if (a.agent) entry["agent"] = a.agent->str();
    if (a.command) entry["command"] = std::string(to_string(*a.command));
    if (!a.range.empty()) entry["range"] = a.range;
    if (a.kind == AdminKind::kQuarantine) entry["on"] = a.on;
    timeline.push_back(std::move(entry));
  }
  return doc;
}

Scenario load_scenario(const std::string& path) {
  const auto text = read_file(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParse, path + ": " + e.what());
  }
  return scenario_from_json(doc, std::filesystem::path(path).parent_path().string());
}

Scenario sequence_scenario(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Scenario s;
  s.name = "shutdown-walkthrough";
  s.seed = seed;
  s.duration_seconds = 300;
  s.policy.enabled = false;
  const DisplayClass classes[] = {DisplayClass::kLcd, DisplayClass::kCrt, DisplayClass::kLcd};
  for (int i = 0; i < 3; ++i) {
    MachineSpec m{.agent = AgentId::parse("pc-0" + std::to_string(i + 1))};
    m.address = "10.0.0." + std::to_string(i + 1);
    m.display_class = classes[i];
    add_inputs(m.trace, rng, 0, s.duration_seconds);
    add_background(m.trace, rng, s.duration_seconds, desktop_processes(rng));
    s.machines.push_back(std::move(m));
  }
  const auto target = AgentId::parse("pc-02");
  s.timeline = {
      {.at = 0, .kind = AdminKind::kStartup},
      {.at = 10, .kind = AdminKind::kScan, .range = "10.0.0.0/29"},
      {.at = 40, .kind = AdminKind::kView},
      {.at = 45, .kind = AdminKind::kDetail, .agent = target},
      {.at = 50, .kind = AdminKind::kIssue, .agent = target, .command = CommandKind::kShutdown},
      {.at = 60, .kind = AdminKind::kAck, .agent = target},
      {.at = 170, .kind = AdminKind::kView},
      {.at = 170, .kind = AdminKind::kAck, .agent = target},
  };
  return s;
}

Scenario lab_scenario(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Scenario s;
  s.name = "lab-110";
  s.seed = seed;
  s.duration_seconds = 3600;
  s.policy.idle_threshold_seconds = 600;
  s.policy.idle_action = CommandKind::kLogoff;
  const auto d = s.duration_seconds;

  for (std::size_t i = 0; i < 110; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "lab-%03zu", i + 1);
    MachineSpec m{.agent = AgentId::parse(id)};
    m.address = lab_address(1, i);
    m.display_class = i < 47 ? DisplayClass::kCrt : DisplayClass::kLcd;
    auto& trace = m.trace;
    switch (rng() % 6) {
      case 0:  // busy all hour
        add_inputs(trace, rng, 0, d);
        break;
      case 1: {  // walks away and never returns
        add_inputs(trace, rng, 0, pick<std::int64_t>(rng, 300, d - 1500));
        break;
      }
      case 2: {  // one long break
        const auto gap = pick<std::int64_t>(rng, 800, 1500);
        const auto stop = pick<std::int64_t>(rng, 300, d - gap - 300);
        add_inputs(trace, rng, 0, stop);
        add_inputs(trace, rng, trace.inputs.back() + gap, d);
        break;
      }
      case 3: {  // one short break
        const auto gap = pick<std::int64_t>(rng, 300, 500);
        const auto stop = pick<std::int64_t>(rng, 300, d - gap - 300);
        add_inputs(trace, rng, 0, stop);
        add_inputs(trace, rng, trace.inputs.back() + gap, d);
        break;
      }
      case 4:  // leaves near the end
        add_inputs(trace, rng, 0, pick<std::int64_t>(rng, d - 500, d - 200));
        break;
      default:  // nobody at the console
        break;
    }
    add_background(trace, rng, d, desktop_processes(rng));
    s.machines.push_back(std::move(m));
  }
  s.timeline = {{.at = 0, .kind = AdminKind::kStartup}, {.at = d, .kind = AdminKind::kView}};
  return s;
}

Scenario suspicious_scenario(std::uint64_t seed, std::size_t flagged) {
  static const char* const kBad[] = {"CryptoMiner.exe", "cryptominer", "KeyLogger.exe", "xkeylogd",
                                     "nc.exe",          "NC.EXE",      "trojan1.exe"};
  static const char* const kNearMiss[] = {"cryptography-svc.exe", "key-logic.exe", "nc64.exe",
                                          "trojan.exe",           "trojan12.exe",  "minesweeper.exe"};
  constexpr std::size_t kMachines = 180;
  if (flagged > kMachines) throw Error(ErrorCode::kInvalidArgument, "more flagged machines than machines");

  std::mt19937_64 rng(seed);
  Scenario s;
  s.name = "suspicious-180";
  s.seed = seed;
  s.duration_seconds = 120;
  s.policy.enabled = false;
  s.watchlist = {"cryptominer*", "*keylog*", "nc.exe", "trojan?.exe"};

  std::vector<std::size_t> order(kMachines);
  for (std::size_t i = 0; i < kMachines; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  const std::set<std::size_t> bad(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(flagged));

  for (std::size_t i = 0; i < kMachines; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "ws-%03zu", i + 1);
    MachineSpec m{.agent = AgentId::parse(id)};
    m.address = lab_address(2, i);
    m.display_class = rng() % 2 ? DisplayClass::kLcd : DisplayClass::kCrt;
    add_inputs(m.trace, rng, 0, s.duration_seconds);
    auto processes = desktop_processes(rng);
    std::int64_t pid = 5000;
    if (rng() % 2 == 0) processes.push_back({kNearMiss[rng() % std::size(kNearMiss)], pid++, 1024});
    if (bad.contains(i)) {
      const auto count = 1 + rng() % 2;
      for (std::size_t k = 0; k < count; ++k) processes.push_back({kBad[rng() % std::size(kBad)], pid++, 2048});
    }
    add_background(m.trace, rng, s.duration_seconds, std::move(processes));
    s.machines.push_back(std::move(m));
  }
  s.timeline = {{.at = 0, .kind = AdminKind::kStartup}, {.at = s.duration_seconds, .kind = AdminKind::kView}};
  return s;
}

}  // namespace fleetwarden
