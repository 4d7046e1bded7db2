// agent: the per-machine daemon.
//   agent run --config <path> [--dry-run]
//   agent id [--config <path>]
//   agent simulate --trace <path> [--threshold s] [--period s] [--until s]

#include "fleetwarden/agent/agent.hpp"
#include "fleetwarden/agent/trace.hpp"
#include "fleetwarden/core/error.hpp"
#include "fleetwarden/http/client.hpp"
#include "fleetwarden/ledger/ledger.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <thread>

using namespace fleetwarden;

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

// Sleeps up to `seconds`, waking early on a stop request.
void nap(std::int64_t seconds, const Agent& agent) {
  const auto until = std::chrono::steady_clock::now() + std::chrono::seconds(seconds);
  while (!g_stop && !agent.halted() && std::chrono::steady_clock::now() < until) {
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
  }
}

class LockFile {
 public:
  explicit LockFile(const std::filesystem::path& path) {
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error(ErrorCode::kStorage, "cannot open lock file " + path.string());
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      throw Error(ErrorCode::kAlreadyExists, "another agent holds " + path.string());
    }
  }
  ~LockFile() { ::close(fd_); }
  LockFile(const LockFile&) = delete;
  LockFile& operator=(const LockFile&) = delete;

 private:
  int fd_ = -1;
};

int run(const std::string& config_path, bool dry_run) {
  auto config = load_agent_config(config_path);
  config.validate();
  if (config.state_dir.empty()) throw Error(ErrorCode::kValidation, "state_dir is required to run");
  std::filesystem::create_directories(config.state_dir);
  LockFile lock(std::filesystem::path(config.state_dir) / "agent.lock");

  SystemClock clock;
  std::unique_ptr<FileLineStore> store;
  std::unique_ptr<LineLedger> line_ledger;
  std::unique_ptr<Ledger> ledger;
  if (config.ledger_mode == LedgerMode::kFile) {
    store = std::make_unique<FileLineStore>(config.ledger_root);
    line_ledger = std::make_unique<LineLedger>(*store);
    ledger = std::make_unique<LocalLedgerClient>(*line_ledger, Principal::agent_of(config.agent_id));
  } else {
    ledger = std::make_unique<HttpLedgerClient>(config.endpoint, config.auth_token, config.agent_id);
  }

  TerminalInputSource input;
  ProcfsProcessSource processes;
  ProcNetDevCounterSource traffic;
  SystemPlatform platform(SystemPlatform::Commands{}, dry_run);
  FileDedupeJournal journal(std::filesystem::path(config.state_dir) / "journal.log");
  Agent agent(config, clock, AgentSources{input, processes, traffic}, *ledger, platform, journal, clock.now());

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  spdlog::info("agent {} started ({} mode)", config.agent_id.str(),
               config.ledger_mode == LedgerMode::kFile ? "file" : "http");

  std::thread heartbeats([&] {
    while (!g_stop && !agent.halted()) {
      try {
        agent.heartbeat_tick();
      } catch (const std::exception& e) {
        spdlog::error("heartbeat failed: {}", e.what());
      }
      nap(config.heartbeat_period_seconds, agent);
    }
  });
  while (!g_stop && !agent.halted()) {
    try {
      for (const auto& id : agent.poll_and_execute()) spdlog::info("executed {}", id);
    } catch (const Error& e) {
      spdlog::warn("command poll failed: {}", e.what());
    }
    nap(config.command_poll_period_seconds, agent);
  }
  heartbeats.join();
  spdlog::info("agent stopped{}", agent.halted() ? " after a halting command" : "");
  return 0;
}

std::string hostname_id() {
  char name[256] = {};
  if (::gethostname(name, sizeof name - 1) != 0) throw Error(ErrorCode::kNotFound, "no hostname");
  return name;
}

int simulate(const std::string& trace_path, const std::string& agent_id, std::int64_t threshold,
             std::int64_t period, std::optional<std::int64_t> until) {
  const auto trace = ActivityTrace::load(trace_path);
  FakeClock clock(0);
  MemoryLineStore store;
  LineLedger ledger(store);
  AgentConfig config{.agent_id = AgentId::parse(agent_id)};
  config.idle_threshold_seconds = threshold;
  config.heartbeat_period_seconds = period;
  config.ledger_root = "memory";
  config.validate();
  LocalLedgerClient client(ledger, Principal::agent_of(config.agent_id));
  SimulatedPlatform platform(clock);
  MemoryDedupeJournal journal;
  ScriptedSources sources(trace, clock, 0);
  Agent agent(config, clock, sources.sources(), client, platform, journal, 0);

  store.set_observer([](const std::string&, std::string_view line) { std::cout << line << '\n'; });
  const auto end = until.value_or(trace.end_time());
  for (std::int64_t t = 0; t <= end; t += period) {
    clock.set(t);
    agent.heartbeat_tick();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fleetwarden agent"};
  app.require_subcommand(1);

  std::string config_path;
  bool dry_run = false;
  auto* run_cmd = app.add_subcommand("run", "Run the heartbeat and command loops");
  run_cmd->add_option("--config", config_path, "Agent config (JSON)")->required()->check(CLI::ExistingFile);
  run_cmd->add_flag("--dry-run", dry_run, "Log OS commands instead of running them");

  std::string id_config;
  auto* id_cmd = app.add_subcommand("id", "Print this machine's agent id");
  id_cmd->add_option("--config", id_config, "Agent config; without it the hostname is used")
      ->check(CLI::ExistingFile);

  std::string trace_path;
  std::string sim_agent = "sim";
  std::int64_t threshold = 600;
  std::int64_t period = 30;
  std::optional<std::int64_t> until;
  auto* sim_cmd = app.add_subcommand("simulate", "Print the heartbeats a scripted trace produces");
  sim_cmd->add_option("--trace", trace_path, "Activity trace")->required()->check(CLI::ExistingFile);
  sim_cmd->add_option("--agent", sim_agent, "Agent id to report as");
  sim_cmd->add_option("--threshold", threshold, "Idle threshold in seconds");
  sim_cmd->add_option("--period", period, "Heartbeat period in seconds")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--until", until, "Last trace second to sample (default: end of trace)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return run(config_path, dry_run);
    if (*id_cmd) {
      const auto id = id_config.empty() ? AgentId::parse(hostname_id()) : load_agent_config(id_config).agent_id;
      std::cout << id.str() << '\n';
      return 0;
    }
    return simulate(trace_path, sim_agent, threshold, period, until);
  } catch (const Error& e) {
    std::cerr << "agent: " << to_string(e.code()) << ": " << e.what() << '\n';
    return 1;
  }
}
