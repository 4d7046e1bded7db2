#pragma once

#include "fleetwarden/core/clock.hpp"
#include "fleetwarden/ledger/types.hpp"

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace fleetwarden {

struct ActionOutcome {
  bool ok = false;
  std::string detail;

  friend bool operator==(const ActionOutcome&, const ActionOutcome&) = default;
};

struct ActionContext {
  std::string command_id;
};

/// Machine-level actions the agent can take on behalf of a command.
class PlatformAction {
 public:
  virtual ~PlatformAction() = default;
  virtual ActionOutcome shutdown(const ActionContext& ctx) = 0;
  virtual ActionOutcome restart(const ActionContext& ctx) = 0;
  virtual ActionOutcome logoff(const ActionContext& ctx) = 0;
  virtual ActionOutcome hibernate(const ActionContext& ctx) = 0;
};

ActionOutcome invoke(PlatformAction& platform, CommandKind kind, const ActionContext& ctx);

/// Whether a successful action takes the machine (and the agent) down.
bool halts_agent(CommandKind kind);

enum class PowerState { kOn, kSleep, kOff };

/// Records every invocation and models the machine's power state. Failures
/// can be scripted per kind.
class SimulatedPlatform final : public PlatformAction {
 public:
  struct Invocation {
    CommandKind kind;
    std::string command_id;
    Timestamp at;
  };
  using Observer = std::function<void(const Invocation&, const ActionOutcome&)>;

  explicit SimulatedPlatform(const Clock& clock) : clock_(clock) {}

  ActionOutcome shutdown(const ActionContext& ctx) override { return record(CommandKind::kShutdown, ctx); }
  ActionOutcome restart(const ActionContext& ctx) override { return record(CommandKind::kRestart, ctx); }
  ActionOutcome logoff(const ActionContext& ctx) override { return record(CommandKind::kLogoff, ctx); }
  ActionOutcome hibernate(const ActionContext& ctx) override { return record(CommandKind::kHibernate, ctx); }

  /// Subsequent invocations of `kind` fail with `detail` (nullopt clears).
  void set_failure(CommandKind kind, std::optional<std::string> detail);
  void set_observer(Observer observer);

  std::vector<Invocation> invocations() const;
  std::size_t count(std::string_view command_id) const;
  PowerState power() const;
  void set_power(PowerState state);

 private:
  ActionOutcome record(CommandKind kind, const ActionContext& ctx);

  const Clock& clock_;
  mutable std::mutex mutex_;
  std::vector<Invocation> invocations_;
  std::map<CommandKind, std::string> failures_;
  PowerState power_ = PowerState::kOn;
  Observer observer_;
};

/// Runs OS commands through the shell. With dry_run the command line is
/// reported but not executed.
class SystemPlatform final : public PlatformAction {
 public:
  struct Commands {
    std::string shutdown = "systemctl poweroff";
    std::string restart = "systemctl reboot";
    std::string logoff = "loginctl terminate-seat seat0";
    std::string hibernate = "systemctl hibernate";
  };

  explicit SystemPlatform(Commands commands, bool dry_run = false)
      : commands_(std::move(commands)), dry_run_(dry_run) {}

  ActionOutcome shutdown(const ActionContext& ctx) override { return run(commands_.shutdown, ctx); }
  ActionOutcome restart(const ActionContext& ctx) override { return run(commands_.restart, ctx); }
  ActionOutcome logoff(const ActionContext& ctx) override { return run(commands_.logoff, ctx); }
  ActionOutcome hibernate(const ActionContext& ctx) override { return run(commands_.hibernate, ctx); }

 private:
  ActionOutcome run(const std::string& command, const ActionContext& ctx);

  Commands commands_;
  bool dry_run_;
};

}  // namespace fleetwarden
