#include "fleetwarden/agent/platform.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>

namespace fleetwarden {

ActionOutcome invoke(PlatformAction& platform, CommandKind kind, const ActionContext& ctx) {
  switch (kind) {
    case CommandKind::kShutdown: return platform.shutdown(ctx);
    case CommandKind::kRestart: return platform.restart(ctx);
    case CommandKind::kLogoff: return platform.logoff(ctx);
    case CommandKind::kHibernate: return platform.hibernate(ctx);
  }
  return {false, "unknown command kind"};
}

bool halts_agent(CommandKind kind) { return kind != CommandKind::kLogoff; }

void SimulatedPlatform::set_failure(CommandKind kind, std::optional<std::string> detail) {
  std::lock_guard lock(mutex_);
  if (detail) {
    failures_[kind] = *detail;
  } else {
    failures_.erase(kind);
  }
}

void SimulatedPlatform::set_observer(Observer observer) {
  std::lock_guard lock(mutex_);
  observer_ = std::move(observer);
}

ActionOutcome SimulatedPlatform::record(CommandKind kind, const ActionContext& ctx) {
  Observer observer;
  Invocation inv{kind, ctx.command_id, clock_.now()};
  ActionOutcome outcome;
  {
    std::lock_guard lock(mutex_);
    invocations_.push_back(inv);
    if (auto it = failures_.find(kind); it != failures_.end()) {
      outcome = {false, it->second};
    } else {
      outcome = {true, "simulated " + std::string(to_string(kind))};
      if (kind == CommandKind::kShutdown || kind == CommandKind::kRestart) power_ = PowerState::kOff;
      if (kind == CommandKind::kHibernate) power_ = PowerState::kSleep;
    }
    observer = observer_;
  }
  if (observer) observer(inv, outcome);
  return outcome;
}

std::vector<SimulatedPlatform::Invocation> SimulatedPlatform::invocations() const {
  std::lock_guard lock(mutex_);
  return invocations_;
}

std::size_t SimulatedPlatform::count(std::string_view command_id) const {
  std::lock_guard lock(mutex_);
  return static_cast<std::size_t>(std::count_if(invocations_.begin(), invocations_.end(),
                                                [&](const Invocation& i) { return i.command_id == command_id; }));
}

PowerState SimulatedPlatform::power() const {
  std::lock_guard lock(mutex_);
  return power_;
}

void SimulatedPlatform::set_power(PowerState state) {
  std::lock_guard lock(mutex_);
  power_ = state;
}

ActionOutcome SystemPlatform::run(const std::string& command, const ActionContext& ctx) {
  if (command.empty()) return {false, "no command configured"};
  if (dry_run_) return {true, "dry-run: " + command + " (" + ctx.command_id + ")"};
  const int rc = std::system(command.c_str());
  if (rc == -1) return {false, "could not start: " + command};
  if (WIFEXITED(rc) && WEXITSTATUS(rc) == 0) return {true, command};
  return {false, command + " exited with status " + std::to_string(WIFEXITED(rc) ? WEXITSTATUS(rc) : rc)};
}

}  // namespace fleetwarden
