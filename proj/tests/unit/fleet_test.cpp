#include "fleetwarden/controller/fleet_view.hpp"
#include "fleetwarden/controller/registry.hpp"
#include "fleetwarden/controller/scan.hpp"
#include "fleetwarden/core/error.hpp"

#include <doctest.h>

#include <random>
#include <regex>
#include <thread>

using namespace fleetwarden;

namespace {

MachineRecord machine(std::string_view id, bool quarantined = false) {
  return MachineRecord{.agent = AgentId::parse(id),
                       .address = "10.0.0.1",
                       .display_class = DisplayClass::kLcd,
                       .power_model = "lcd",
                       .quarantined = quarantined,
                       .last_seen = std::nullopt,
                       .registered_at = 0};
}

StatusEntry beat(std::string_view id, Timestamp at, std::vector<ProcessInfo> procs = {}, std::uint64_t seq = 1,
                 Timestamp boot = 1) {
  StatusEntry e{.agent = AgentId::parse(id)};
  e.timestamp = at;
  e.seq = seq;
  e.boot = boot;
  e.processes = std::move(procs);
  return e;
}

// Reference glob matcher built on std::regex.
bool regex_glob(std::string_view pattern, std::string_view text) {
  std::string re;
  for (char c : pattern) {
    if (c == '*') {
      re += ".*";
    } else if (c == '?') {
      re += '.';
    } else {
      if (std::string_view("\\^$.|+()[]{}").find(c) != std::string_view::npos) re += '\\';
      re += c;
    }
  }
  return std::regex_match(std::string(text), std::regex(re, std::regex::icase));
}

}  // namespace

TEST_CASE("liveness windows") {
  const LivenessWindows w{90, 300};
  CHECK(liveness_of(beat("a", 990), 1000, w) == Liveness::kActive);
  CHECK(liveness_of(beat("a", 911), 1000, w) == Liveness::kActive);
  CHECK(liveness_of(beat("a", 910), 1000, w) == Liveness::kStale);
  CHECK(liveness_of(beat("a", 701), 1000, w) == Liveness::kStale);
  CHECK(liveness_of(beat("a", 700), 1000, w) == Liveness::kOffline);
  CHECK(liveness_of(std::nullopt, 1000, w) == Liveness::kOffline);
  CHECK(LivenessWindows::from_heartbeat(30).stale_seconds == 90);
  CHECK(LivenessWindows::from_heartbeat(30).offline_seconds == 300);
}

TEST_CASE("fleet view joins registry and heartbeats") {
  const std::vector<MachineRecord> registry = {machine("pc-b"), machine("pc-a"), machine("pc-c")};
  std::map<AgentId, StatusEntry> latest;
  latest.emplace(AgentId::parse("pc-a"), beat("pc-a", 990, {{"cryptominer.exe", 7, 0}, {"bash", 3, 0}}));
  latest.emplace(AgentId::parse("pc-b"), beat("pc-b", 800));
  latest.emplace(AgentId::parse("stranger"), beat("stranger", 999));
  const Watchlist watch({"cryptominer*"});

  const auto view = fleet_view(registry, latest, watch, 1000, LivenessWindows{90, 300});
  REQUIRE(view.rows.size() == 3);
  CHECK(view.rows[0].machine.agent.str() == "pc-a");
  CHECK(view.rows[0].liveness == Liveness::kActive);
  CHECK(view.rows[0].suspicious == std::vector<std::string>{"cryptominer.exe"});
  CHECK(view.rows[0].machine.last_seen == 990);
  CHECK(view.rows[1].liveness == Liveness::kStale);
  CHECK(view.rows[2].liveness == Liveness::kOffline);
  CHECK_FALSE(view.rows[2].latest);
  CHECK(view.find(AgentId::parse("stranger")) == nullptr);

  // Same inputs, same output.
  const auto again = fleet_view(registry, latest, watch, 1000, LivenessWindows{90, 300});
  CHECK(again.rows.size() == view.rows.size());
  for (std::size_t i = 0; i < view.rows.size(); ++i) {
    CHECK(again.rows[i].machine == view.rows[i].machine);
    CHECK(again.rows[i].liveness == view.rows[i].liveness);
    CHECK(again.rows[i].suspicious == view.rows[i].suspicious);
  }
}

TEST_CASE("last_seen never exceeds now") {
  std::map<AgentId, StatusEntry> latest;
  latest.emplace(AgentId::parse("pc-a"), beat("pc-a", 2000));
  const auto view = fleet_view({machine("pc-a")}, latest, {}, 1000, {});
  CHECK(view.rows[0].machine.last_seen == 1000);
}

TEST_CASE("detect_suspicious") {
  const Watchlist watch({"*virus*", "cryptominer*", "*VIRUS*", ""});
  CHECK(watch.patterns().size() == 2);
  CHECK(detect_suspicious({{"bash", 1, 0}, {"sshd", 2, 0}}, watch).empty());
  CHECK(detect_suspicious({{"AVirusToolkit", 1, 0}}, watch) == std::vector<std::string>{"AVirusToolkit"});
  CHECK(detect_suspicious({{"CryptoMiner", 1, 0}, {"CryptoMiner", 2, 0}, {"avirus", 3, 0}}, watch) ==
        std::vector<std::string>{"CryptoMiner", "avirus"});
  CHECK(detect_suspicious({{"x", 1, 0}}, Watchlist{}).empty());
}

TEST_CASE("glob_match agrees with a regex reference") {
  std::mt19937 rng(11);
  const std::string alphabet = "aAbB.*?";
  const std::string text_alphabet = "aAbB.";
  auto random_string = [&](const std::string& from, int max_len) {
    std::string s(rng() % (max_len + 1), ' ');
    for (auto& c : s) c = from[rng() % from.size()];
    return s;
  };
  for (int i = 0; i < 20000; ++i) {
    const auto pattern = random_string(alphabet, 6);
    const auto text = random_string(text_alphabet, 8);
    REQUIRE_MESSAGE(glob_match(pattern, text) == regex_glob(pattern, text), pattern << " vs " << text);
  }
}

TEST_CASE("registry") {
  Registry registry;
  const auto rec = registry.register_machine(AgentId::parse("lab1-pc07"), "10.0.0.7", DisplayClass::kLcd, 50);
  CHECK_FALSE(rec.quarantined);
  CHECK(rec.power_model == "lcd");
  CHECK(rec.registered_at == 50);
  CHECK_THROWS_AS(registry.register_machine(AgentId::parse("lab1-pc07"), "10.0.0.8", DisplayClass::kCrt, 51), Error);
  CHECK_THROWS_AS(registry.register_machine(AgentId::parse("x"), "10.0.0.300", DisplayClass::kCrt, 51), Error);
  CHECK(registry.set_quarantine(AgentId::parse("lab1-pc07"), true).quarantined);
  CHECK_FALSE(registry.set_quarantine(AgentId::parse("lab1-pc07"), false).quarantined);
  try {
    registry.set_quarantine(AgentId::parse("nobody"), true);
    FAIL("expected not found");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNotFound);
  }

  Registry lab;
  for (int i = 0; i < 110; ++i) {
    lab.register_machine(AgentId::parse("lab-pc" + std::to_string(i)), "10.1.0." + std::to_string(i + 1),
                         i < 47 ? DisplayClass::kCrt : DisplayClass::kLcd, 0);
  }
  CHECK(lab.size() == 110);
  std::size_t crt = 0;
  for (const auto& m : lab.list()) crt += m.display_class == DisplayClass::kCrt;
  CHECK(crt == 47);
}

TEST_CASE("registry concurrent readers and writers") {
  Registry registry;
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 50; ++i) {
        registry.register_machine(AgentId::parse("t" + std::to_string(t) + "-" + std::to_string(i)), "10.0.0.1",
                                  DisplayClass::kOther, i);
        (void)registry.list();
      }
    });
  }
  for (auto& th : threads) th.join();
  CHECK(registry.size() == 200);
}

TEST_CASE("address ranges") {
  CHECK(AddressRange::parse("10.0.0.0/30").addresses() == std::vector<std::string>{"10.0.0.1", "10.0.0.2"});
  CHECK(AddressRange::parse("10.0.0.0/24").size() == 254);
  CHECK(AddressRange::parse("10.0.0.4/31").size() == 2);
  CHECK(AddressRange::parse("10.0.0.9/32").addresses() == std::vector<std::string>{"10.0.0.9"});
  CHECK(AddressRange::parse("10.0.0.250-10.0.1.1").size() == 8);
  CHECK(AddressRange::parse("192.168.1.5").size() == 1);
  CHECK_THROWS_AS(AddressRange::parse("10.0.0.0/33"), Error);
  CHECK_THROWS_AS(AddressRange::parse("10.0.0.9-10.0.0.1"), Error);
  CHECK_THROWS_AS(AddressRange::parse("banana"), Error);
  CHECK_THROWS_AS(AddressRange::parse("10.0.0.0/8"), Error);
}

TEST_CASE("scan_network") {
  FixtureProber prober({"10.0.0.10", "10.0.0.2", "10.0.0.99"});
  CHECK(scan_network(AddressRange::parse("10.0.0.1-10.0.0.10"), prober) ==
        std::vector<std::string>{"10.0.0.2", "10.0.0.10"});
  CHECK(scan_network(AddressRange::empty(), prober).empty());
  FixtureProber dead;
  CHECK(scan_network(AddressRange::parse("10.0.0.0/28"), dead).empty());
}

TEST_CASE("tcp prober") {
  TcpProber prober(9, std::chrono::milliseconds(50));
  CHECK_FALSE(prober.alive("not-an-address"));
  // Loopback always answers (accept or refuse).
  CHECK(prober.alive("127.0.0.1"));
}

TEST_CASE("acknowledgement") {
  const auto id = AgentId::parse("pc-a");
  std::map<AgentId, StatusEntry> before_latest;
  before_latest.emplace(id, beat("pc-a", 1000, {}, 40, 10));
  const auto before = fleet_view({machine("pc-a")}, before_latest, {}, 1000, {90, 300});

  CommandEntry cmd{.command_id = "c1",
                   .target = id,
                   .kind = CommandKind::kShutdown,
                   .issued_at = 1000,
                   .expires_at = 1300,
                   .state = CommandState::kPending,
                   .result_note = std::nullopt};
  CHECK(confirm_acknowledgement(before, before, id, cmd) == AckStatus::kAwaiting);

  cmd.state = CommandState::kExecuted;
  CHECK(confirm_acknowledgement(before, before, id, cmd) == AckStatus::kAwaiting);
  const auto stale = fleet_view({machine("pc-a")}, before_latest, {}, 1100, {90, 300});
  CHECK(confirm_acknowledgement(before, stale, id, cmd) == AckStatus::kAcknowledged);

  cmd.kind = CommandKind::kRestart;
  CHECK(confirm_acknowledgement(before, stale, id, cmd) == AckStatus::kAwaiting);
  std::map<AgentId, StatusEntry> after_latest;
  after_latest.emplace(id, beat("pc-a", 1040, {}, 0, 1030));
  const auto restarted = fleet_view({machine("pc-a")}, after_latest, {}, 1040, {90, 300});
  CHECK(confirm_acknowledgement(before, restarted, id, cmd) == AckStatus::kAcknowledged);

  cmd.state = CommandState::kFailed;
  CHECK(confirm_acknowledgement(before, restarted, id, cmd) == AckStatus::kAwaiting);
}
