#pragma once

// Random record generators shared by the property tests.

#include "fleetwarden/ledger/types.hpp"

#include <random>
#include <string>

namespace fleetwarden::testing {

inline std::string random_text(std::mt19937_64& rng, std::size_t min_len, std::size_t max_len) {
  // Mix of ASCII, JSON-special characters and multi-byte UTF-8.
  static const char* const kPieces[] = {"a", "b", "Z", "0", "9", "-", "_", ".", " ", "\"", "\\", "{", "}",
                                        ",", ":", "\t", "\xc3\xa9", "\xe2\x82\xac", "\xf0\x9f\x96\xa5"};
  std::uniform_int_distribution<std::size_t> len(min_len, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, std::size(kPieces) - 1);
  std::string out;
  const auto n = len(rng);
  for (std::size_t i = 0; i < n; ++i) out += kPieces[pick(rng)];
  return out;
}

inline AgentId random_agent(std::mt19937_64& rng) {
  static const char kAlphabet[] = "abcdefghijklmnopqrstuvwxyz0123456789-_.";
  std::uniform_int_distribution<std::size_t> len(1, 24);
  std::uniform_int_distribution<std::size_t> pick(0, sizeof kAlphabet - 2);
  std::string id;
  const auto n = len(rng);
  for (std::size_t i = 0; i < n; ++i) id.push_back(kAlphabet[pick(rng)]);
  if (id == "." || id == "..") id = "pc";
  return AgentId::parse(id);
}

inline StatusEntry random_status(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::int64_t> ts(0, 4'000'000'000LL);
  std::uniform_int_distribution<std::uint64_t> big(0, ~0ULL);
  std::uniform_int_distribution<int> procs(0, 12);
  StatusEntry e{.agent = random_agent(rng)};
  e.boot = ts(rng);
  e.seq = big(rng) >> (rng() % 64);
  e.timestamp = ts(rng);
  e.status = rng() % 2 ? Status::kIdle : Status::kBusy;
  e.idle_seconds = std::uniform_int_distribution<std::int64_t>(0, 10'000'000)(rng);
  const int n = procs(rng);
  for (int i = 0; i < n; ++i) {
    e.processes.push_back({random_text(rng, 1, 20), std::uniform_int_distribution<std::int64_t>(1, 4'000'000)(rng),
                           std::uniform_int_distribution<std::int64_t>(0, 64'000'000)(rng)});
  }
  e.traffic = {big(rng), big(rng), big(rng) >> 20, big(rng) >> 20};
  e.degraded = rng() % 5 == 0;
  e.traffic_reset = rng() % 7 == 0;
  return e;
}

inline CommandEntry random_command(std::mt19937_64& rng) {
  static const CommandKind kKinds[] = {CommandKind::kShutdown, CommandKind::kRestart, CommandKind::kLogoff,
                                       CommandKind::kHibernate};
  static const CommandState kStates[] = {CommandState::kPending, CommandState::kExecuted, CommandState::kFailed,
                                         CommandState::kExpired};
  CommandEntry e{.command_id = "cmd-" + std::to_string(rng()), .target = random_agent(rng)};
  e.kind = kKinds[rng() % 4];
  e.issued_at = std::uniform_int_distribution<std::int64_t>(0, 4'000'000'000LL)(rng);
  e.expires_at = e.issued_at + std::uniform_int_distribution<std::int64_t>(1, 100'000)(rng);
  e.state = kStates[rng() % 4];
  if (rng() % 2) e.result_note = random_text(rng, 0, 40);
  return e;
}

inline Record random_record(std::mt19937_64& rng) {
  if (rng() % 2) return random_status(rng);
  return random_command(rng);
}

}  // namespace fleetwarden::testing
