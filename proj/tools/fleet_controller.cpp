// fleet-controller: the controller daemon (HTTP API plus the background tick).
//   fleet-controller --config <path>

#include "fleetwarden/controller/controller.hpp"
#include "fleetwarden/core/error.hpp"
#include "fleetwarden/http/server.hpp"
#include "fleetwarden/persistence/event_store.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <thread>

using namespace fleetwarden;

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

int serve(const std::string& config_path, std::uint16_t probe_port, int probe_timeout_ms) {
  auto config = load_controller_config(config_path);
  config.validate();
  if (config.ledger_root.empty()) throw Error(ErrorCode::kValidation, "ledger_root is required");
  if (config.data_dir.empty()) throw Error(ErrorCode::kValidation, "data_dir is required");
  if (config.auth_token.empty()) throw Error(ErrorCode::kValidation, "auth_token is required");

  SystemClock clock;
  FileLineStore store(config.ledger_root);
  LineLedger ledger(store);
  FileEventStore events(config.data_dir);
  if (events.skipped() > 0) spdlog::warn("dropped {} torn record(s) at the end of the event log", events.skipped());
  TcpProber prober(probe_port, std::chrono::milliseconds(probe_timeout_ms));
  IdGenerator ids;
  Controller controller(config, clock, ledger, events, prober, ids);

  ApiServer server(ledger, clock, &controller, config.auth_token, config.static_dir);
  const auto port = server.bind(config.listen_address, config.listen_port);
  server.start();
  spdlog::info("listening on {}:{}, {} machine(s) registered", config.listen_address, port,
               controller.registry().size());

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  auto next = std::chrono::steady_clock::now();
  while (!g_stop) {
    if (std::chrono::steady_clock::now() >= next) {
      try {
        const auto report = controller.tick();
        for (const auto& c : report.issued) {
          spdlog::info("policy issued {} {} to {}", to_string(c.kind), c.command_id, c.target.str());
        }
        for (const auto& c : report.expired) spdlog::info("expired {} for {}", c.command_id, c.target.str());
        if (report.skipped > 0) spdlog::warn("skipped {} unreadable ledger line(s)", report.skipped);
      } catch (const Error& e) {
        spdlog::error("tick failed: {}", e.what());
      }
      next += std::chrono::seconds(config.tick_period_seconds);
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
  }
  server.stop();
  spdlog::info("stopped");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fleetwarden controller"};
  std::string config_path;
  std::uint16_t probe_port = 7;
  int probe_timeout_ms = 300;
  app.add_option("--config", config_path, "Controller config (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--probe-port", probe_port, "TCP port used to probe addresses during scans");
  app.add_option("--probe-timeout-ms", probe_timeout_ms, "Per-address probe timeout")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  try {
    return serve(config_path, probe_port, probe_timeout_ms);
  } catch (const Error& e) {
    std::cerr << "fleet-controller: " << to_string(e.code()) << ": " << e.what() << '\n';
    return 1;
  }
}
