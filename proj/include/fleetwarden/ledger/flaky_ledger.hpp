#pragma once

#include "fleetwarden/core/error.hpp"
#include "fleetwarden/ledger/ledger.hpp"

#include <atomic>

namespace fleetwarden {

/// Decorator that can make a ledger transport unavailable, for fault
/// injection in tests and the simulator.
class FlakyLedger final : public Ledger {
 public:
  explicit FlakyLedger(Ledger& inner) : inner_(inner) {}

  void set_available(bool available) { available_ = available; }
  bool available() const { return available_; }

  LedgerPosition append(const Record& record) override {
    check();
    return inner_.append(record);
  }
  std::map<AgentId, StatusEntry> read_latest_per_agent() override {
    check();
    return inner_.read_latest_per_agent();
  }
  std::vector<CommandEntry> read_pending_commands(const AgentId& target, Timestamp now) override {
    check();
    return inner_.read_pending_commands(target, now);
  }
  CommandEntry transition_command(std::string_view command_id, CommandState new_state,
                                  std::optional<std::string> result_note) override {
    check();
    return inner_.transition_command(command_id, new_state, std::move(result_note));
  }

 private:
  void check() const {
    if (!available_) throw Error(ErrorCode::kTransportUnavailable, "ledger transport unavailable");
  }

  Ledger& inner_;
  std::atomic<bool> available_{true};
};

}  // namespace fleetwarden
