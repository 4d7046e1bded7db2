#pragma once

#include "fleetwarden/ledger/ledger.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace httplib {
class Client;
}

namespace fleetwarden {

/// JSON-over-HTTP client for the controller. Connection failures raise
/// Error(kTransportUnavailable); error documents are mapped back to their
/// ErrorCode.
class ApiClient {
 public:
  ApiClient(const std::string& endpoint, std::string token, std::optional<AgentId> agent = std::nullopt,
            std::chrono::milliseconds timeout = std::chrono::seconds(5));
  ~ApiClient();
  ApiClient(const ApiClient&) = delete;
  ApiClient& operator=(const ApiClient&) = delete;

  nlohmann::json get(const std::string& path);
  nlohmann::json post(const std::string& path, const nlohmann::json& body);

 private:
  nlohmann::json handle(const std::string& what, int status, const std::string& body);

  std::mutex mutex_;
  std::unique_ptr<httplib::Client> client_;
  std::string token_;
  std::optional<AgentId> agent_;
};

std::string url_encode(std::string_view text);

/// The ledger as seen by one agent (or the controller) over HTTP.
class HttpLedgerClient final : public Ledger {
 public:
  HttpLedgerClient(const std::string& endpoint, std::string token, std::optional<AgentId> agent,
                   std::chrono::milliseconds timeout = std::chrono::seconds(5));

  LedgerPosition append(const Record& record) override;
  std::map<AgentId, StatusEntry> read_latest_per_agent() override;
  std::vector<CommandEntry> read_pending_commands(const AgentId& target, Timestamp now) override;
  CommandEntry transition_command(std::string_view command_id, CommandState new_state,
                                  std::optional<std::string> result_note) override;

 private:
  ApiClient api_;
};

}  // namespace fleetwarden
