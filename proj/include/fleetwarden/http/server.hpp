#pragma once

#include "fleetwarden/controller/controller.hpp"
#include "fleetwarden/ledger/ledger.hpp"

#include <memory>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace fleetwarden {

/// HTTP front of the controller: the ledger endpoints agents use in HTTP
/// mode, the admin API, and the dashboard's static assets at GET /.
///
/// Every /v1 request needs `Authorization: Bearer <token>`. Ledger writes are
/// made as the agent named in `X-Fleet-Agent`, or as the controller when the
/// header is absent.
class ApiServer {
 public:
  ApiServer(LineLedger& ledger, const Clock& clock, Controller* controller, std::string token,
            std::string static_dir = {});
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves on a background thread until stop().
  void start();
  /// Serves on the calling thread until stop().
  void run();
  void stop();

 private:
  void routes();

  LineLedger& ledger_;
  const Clock& clock_;
  Controller* controller_;
  std::string token_;
  std::string static_dir_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace fleetwarden
