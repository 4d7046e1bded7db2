// fleetsim: runs fleet scenarios on a fake clock.
//   fleetsim run <scenario.json> [--trace-out path]
//   fleetsim generate walkthrough|lab|suspicious [--seed n] [--out path]

#include "fleetwarden/core/error.hpp"
#include "fleetwarden/sim/sim.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>
#include <map>

using namespace fleetwarden;

namespace {

int run(const std::string& path, const std::string& trace_out) {
  const auto scenario = load_scenario(path);
  const auto result = run_scenario(scenario);
  const auto text = result.trace.format();
  if (trace_out.empty() || trace_out == "-") {
    std::cout << text;
  } else {
    std::ofstream out(trace_out, std::ios::trunc);
    if (!out) throw Error(ErrorCode::kStorage, "cannot write " + trace_out);
    out << text;
  }

  std::map<std::string, std::size_t> states;
  for (const auto& c : result.commands) ++states[std::string(to_string(c.state))];
  std::cerr << scenario.name << ": " << result.trace.records.size() << " trace records, "
            << result.commands.size() << " command(s)";
  for (const auto& [state, n] : states) std::cerr << ", " << n << ' ' << state;
  std::cerr << ", " << result.invocations.size() << " invocation(s)\n";
  return 0;
}

int generate(const std::string& which, std::optional<std::uint64_t> seed, const std::string& out_path) {
  Scenario scenario;
  if (which == "walkthrough") {
    scenario = seed ? sequence_scenario(*seed) : sequence_scenario();
  } else if (which == "lab") {
    scenario = seed ? lab_scenario(*seed) : lab_scenario();
  } else {
    scenario = seed ? suspicious_scenario(*seed) : suspicious_scenario();
  }
  const auto text = scenario_to_json(scenario).dump(1) + "\n";
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
    return 0;
  }
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kStorage, "cannot write " + out_path);
  out << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fleetwarden scenario simulator"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Show component logs");

  std::string scenario_path;
  std::string trace_out;
  auto* run_cmd = app.add_subcommand("run", "Run a scenario and print its trace");
  run_cmd->add_option("scenario", scenario_path)->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--trace-out", trace_out, "Write the trace here instead of stdout");

  std::string which;
  std::optional<std::uint64_t> seed;
  std::string out_path;
  auto* gen_cmd = app.add_subcommand("generate", "Write one of the built-in scenarios as JSON");
  gen_cmd->add_option("name", which)->required()->check(CLI::IsMember({"walkthrough", "lab", "suspicious"}));
  gen_cmd->add_option("--seed", seed, "Generator seed");
  gen_cmd->add_option("--out", out_path, "Output file (default stdout)");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::info : spdlog::level::err);

  try {
    if (*run_cmd) return run(scenario_path, trace_out);
    return generate(which, seed, out_path);
  } catch (const Error& e) {
    std::cerr << "fleetsim: " << to_string(e.code()) << ": " << e.what() << '\n';
    return 1;
  }
}
