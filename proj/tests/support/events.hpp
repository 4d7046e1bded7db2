#pragma once

// Random fleet-event histories for the persistence properties.

#include "fleetwarden/persistence/event_store.hpp"

#include <random>
#include <string>
#include <vector>

namespace fleetwarden::testing {

/// Events over a small agent pool so that registrations, quarantines and
/// command transitions actually interact (including ones for unknown agents
/// and repeated transitions).
inline std::vector<FleetEvent> random_events(std::mt19937_64& rng, std::size_t count) {
  static const CommandKind kKinds[] = {CommandKind::kShutdown, CommandKind::kRestart, CommandKind::kLogoff,
                                       CommandKind::kHibernate};
  std::vector<FleetEvent> out;
  std::vector<CommandEntry> issued;
  Timestamp now = 1'000'000;
  auto agent = [&] { return AgentId::parse("pc-" + std::to_string(rng() % 6)); };
  for (std::size_t i = 0; i < count; ++i) {
    now += static_cast<Timestamp>(rng() % 50);
    switch (rng() % 7) {
      case 0: {
        const auto cls = static_cast<DisplayClass>(rng() % 3);
        out.push_back(registered_event(MachineRecord{.agent = agent(),
                                                     .address = "10.0.0." + std::to_string(1 + rng() % 200),
                                                     .display_class = cls,
                                                     .power_model = default_power_model(cls),
                                                     .quarantined = false,
                                                     .last_seen = std::nullopt,
                                                     .registered_at = now}));
        break;
      }
      case 1:
        out.push_back(quarantine_event(agent(), rng() % 2 == 0, now));
        break;
      case 2: {
        CommandEntry c{.command_id = "cmd-" + std::to_string(i),
                       .target = agent(),
                       .kind = kKinds[rng() % 4],
                       .issued_at = now,
                       .expires_at = now + 300,
                       .state = CommandState::kPending,
                       .result_note = std::nullopt};
        issued.push_back(c);
        out.push_back(command_issued_event(c, now));
        break;
      }
      case 3:
        if (!issued.empty()) {
          auto c = issued[rng() % issued.size()];
          c.state = static_cast<CommandState>(1 + rng() % 3);
          if (rng() % 2) c.result_note = "note " + std::to_string(i);
          out.push_back(command_transitioned_event(c, now));
        }
        break;
      case 4: {
        Occupancy o{.agent = agent(), .start = now - 300, .end = now};
        o.seconds = {static_cast<std::int64_t>(rng() % 100), static_cast<std::int64_t>(rng() % 100),
                     static_cast<std::int64_t>(rng() % 100), 0};
        o[EnergyState::kOff] = 300 - o.seconds[0] - o.seconds[1] - o.seconds[2];
        out.push_back(summary_event(o, now));
        break;
      }
      case 5:
        out.push_back(suspicious_event(agent(), {"miner" + std::to_string(rng() % 3)}, now));
        break;
      default:
        out.push_back(scan_event("10.0.0.0/29", {"10.0.0." + std::to_string(1 + rng() % 6)}, now));
        break;
    }
  }
  return out;
}

}  // namespace fleetwarden::testing
