#include "fleetwarden/controller/registry.hpp"

#include "fleetwarden/core/error.hpp"

#include <mutex>

namespace fleetwarden {

MachineRecord Registry::register_machine(const AgentId& agent, const std::string& address,
                                         DisplayClass display_class, Timestamp now,
                                         std::optional<std::string> power_model) {
  if (!is_valid_address(address)) throw Error(ErrorCode::kValidation, "invariant violation: address '" + address + "'");
  MachineRecord record{.agent = agent,
                       .address = address,
                       .display_class = display_class,
                       .power_model = power_model.value_or(default_power_model(display_class)),
                       .quarantined = false,
                       .last_seen = std::nullopt,
                       .registered_at = now};
  std::unique_lock lock(mutex_);
  if (records_.contains(agent)) throw Error(ErrorCode::kAlreadyExists, "already registered: " + agent.str());
  records_.emplace(agent, record);
  return record;
}

MachineRecord Registry::set_quarantine(const AgentId& agent, bool on) {
  std::unique_lock lock(mutex_);
  auto it = records_.find(agent);
  if (it == records_.end()) throw Error(ErrorCode::kNotFound, "unknown agent: " + agent.str());
  it->second.quarantined = on;
  return it->second;
}

void Registry::touch(const AgentId& agent, Timestamp seen) {
  std::unique_lock lock(mutex_);
  auto it = records_.find(agent);
  if (it == records_.end()) return;
  if (!it->second.last_seen || *it->second.last_seen < seen) it->second.last_seen = seen;
}

std::optional<MachineRecord> Registry::find(const AgentId& agent) const {
  std::shared_lock lock(mutex_);
  auto it = records_.find(agent);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

std::vector<MachineRecord> Registry::list() const {
  std::shared_lock lock(mutex_);
  std::vector<MachineRecord> out;
  out.reserve(records_.size());
  for (const auto& [_, r] : records_) out.push_back(r);
  return out;
}

std::size_t Registry::size() const {
  std::shared_lock lock(mutex_);
  return records_.size();
}

void Registry::restore(std::map<AgentId, MachineRecord> records) {
  std::unique_lock lock(mutex_);
  records_ = std::move(records);
}

}  // namespace fleetwarden
