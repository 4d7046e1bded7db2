#pragma once

#include "fleetwarden/controller/fleet_view.hpp"

#include <map>
#include <shared_mutex>

namespace fleetwarden {

/// Controller-side machine table. Many concurrent readers, serialized writers.
class Registry {
 public:
  /// Throws kAlreadyExists for a duplicate id, kValidation for a bad address.
  MachineRecord register_machine(const AgentId& agent, const std::string& address, DisplayClass display_class,
                                 Timestamp now, std::optional<std::string> power_model = std::nullopt);
  /// Throws kNotFound for an unknown id.
  MachineRecord set_quarantine(const AgentId& agent, bool on);
  void touch(const AgentId& agent, Timestamp seen);

  std::optional<MachineRecord> find(const AgentId& agent) const;
  std::vector<MachineRecord> list() const;  // ordered by agent id
  std::size_t size() const;

  void restore(std::map<AgentId, MachineRecord> records);

 private:
  mutable std::shared_mutex mutex_;
  std::map<AgentId, MachineRecord> records_;
};

}  // namespace fleetwarden
