// fleetctl: admin command line over the controller's HTTP API.

#include "fleetwarden/core/error.hpp"
#include "fleetwarden/energy/energy.hpp"
#include "fleetwarden/http/client.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <ctime>
#include <iostream>
#include <string>
#include <vector>

using namespace fleetwarden;
using nlohmann::json;

namespace {

std::string humanize(std::int64_t seconds) {
  if (seconds < 60) return std::to_string(seconds) + "s";
  if (seconds < 3600) return std::to_string(seconds / 60) + "m";
  if (seconds < 86400) return std::to_string(seconds / 3600) + "h" + std::to_string(seconds % 3600 / 60) + "m";
  return std::to_string(seconds / 86400) + "d";
}

std::string iso_time(std::int64_t t) {
  const std::time_t tt = t;
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Left-aligned columns sized to their widest cell.
void print_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& row : rows) {
    width.resize(std::max(width.size(), row.size()));
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t i = 0; i < row.size(); ++i) {
      line += row[i];
      if (i + 1 < row.size()) line += std::string(width[i] - row[i].size() + 2, ' ');
    }
    std::cout << line << '\n';
  }
}

std::string text(const json& v) {
  if (v.is_null()) return "-";
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

void print_fleet(const json& doc) {
  const auto at = doc.at("at").get<std::int64_t>();
  std::vector<std::vector<std::string>> rows = {{"AGENT", "ADDRESS", "BADGE", "STATUS", "IDLE", "SUSPICIOUS", "LAST SEEN"}};
  for (const auto& r : doc.at("rows")) {
    const auto idle = r.contains("idle_seconds") ? humanize(r.at("idle_seconds").get<std::int64_t>()) : "-";
    const auto seen = r.at("last_seen").is_null() ? "never" : humanize(at - r.at("last_seen").get<std::int64_t>()) + " ago";
    rows.push_back({text(r.at("agent")), text(r.at("address")), text(r.at("badge")), text(r.at("status")), idle,
                    std::to_string(r.at("suspicious").size()), seen});
  }
  print_table(rows);
}

void print_detail(const json& doc) {
  const auto& m = doc.at("machine");
  std::cout << m.at("agent").get<std::string>() << "  " << text(m.at("address")) << "  " << text(m.at("badge"))
            << "  " << text(m.at("display_class")) << "\n";
  if (!m.at("latest").is_null()) {
    const auto& latest = m.at("latest");
    std::cout << "status " << text(latest.at("status")) << ", idle " << humanize(latest.at("idle_seconds").get<std::int64_t>())
              << ", boot " << iso_time(latest.at("boot").get<std::int64_t>()) << ", seq " << latest.at("seq") << "\n";
    const auto& traffic = latest.at("traffic");
    std::cout << "traffic rx " << traffic.at("rx_bytes") << " B, tx " << traffic.at("tx_bytes") << " B\n";
    if (!m.at("suspicious").empty()) {
      std::cout << "suspicious:";
      for (const auto& s : m.at("suspicious")) std::cout << ' ' << s.get<std::string>();
      std::cout << '\n';
    }
    std::vector<std::vector<std::string>> rows = {{"PID", "NAME", "MEMORY KB"}};
    for (const auto& p : latest.at("processes")) {
      rows.push_back({text(p.at("pid")), text(p.at("name")), text(p.at("memory_kb"))});
    }
    print_table(rows);
  }
  if (!doc.at("commands").empty()) {
    std::vector<std::vector<std::string>> rows = {{"COMMAND", "KIND", "STATE", "ISSUED"}};
    for (const auto& c : doc.at("commands")) {
      rows.push_back({text(c.at("command_id")), text(c.at("kind")), text(c.at("state")),
                      iso_time(c.at("issued_at").get<std::int64_t>())});
    }
    print_table(rows);
  }
}

void print_command(const json& c) {
  std::cout << c.at("command_id").get<std::string>() << ' ' << text(c.at("kind")) << ' ' << text(c.at("target")) << ' '
            << text(c.at("state"));
  if (c.contains("result_note")) std::cout << " (" << text(c.at("result_note")) << ')';
  std::cout << '\n';
}

void print_history(const json& doc) {
  std::vector<std::vector<std::string>> rows = {{"ID", "AT", "KIND", "AGENT", "PAYLOAD"}};
  for (const auto& e : doc.at("events")) {
    rows.push_back({text(e.at("id")), iso_time(e.at("at").get<std::int64_t>()), text(e.at("kind")),
                    e.contains("agent") ? text(e.at("agent")) : "-", e.at("payload").dump()});
  }
  print_table(rows);
}

void print_energy(const json& doc) {
  std::vector<std::vector<std::string>> rows = {{"AGENT", "MODEL", "ACTUAL WH", "ALWAYS-ON WH", "SAVED WH"}};
  for (const auto& r : doc.at("rows")) {
    const auto actual = r.at("actual_mws").get<MilliwattSeconds>();
    const auto baseline = r.at("baseline_mws").get<MilliwattSeconds>();
    rows.push_back({text(r.at("agent")), text(r.at("power_model")), format_wh(actual), format_wh(baseline),
                    format_wh(baseline - actual)});
  }
  const auto& total = doc.at("total");
  const auto actual = total.at("actual_mws").get<MilliwattSeconds>();
  const auto baseline = total.at("baseline_mws").get<MilliwattSeconds>();
  rows.push_back({"TOTAL", "", format_wh(actual), format_wh(baseline), format_wh(baseline - actual)});
  print_table(rows);
  char pct[32];
  std::snprintf(pct, sizeof pct, "%.1f%%", total.at("saved_fraction").get<double>() * 100.0);
  std::cout << "saved " << pct << " between " << iso_time(doc.at("since").get<std::int64_t>()) << " and "
            << iso_time(doc.at("until").get<std::int64_t>()) << '\n';
}

std::string query(const std::vector<std::pair<std::string, std::string>>& params) {
  std::string out;
  for (const auto& [k, v] : params) {
    if (v.empty()) continue;
    out += (out.empty() ? "?" : "&") + k + "=" + url_encode(v);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fleetwarden admin client"};
  app.require_subcommand(1);
  std::string endpoint = "http://127.0.0.1:8420";
  std::string token;
  bool as_json = false;
  app.add_option("--endpoint", endpoint, "Controller URL")->envname("FLEETWARDEN_ENDPOINT");
  app.add_option("--token", token, "Bearer token")->envname("FLEETWARDEN_AUTH_TOKEN");
  app.add_flag("--json", as_json, "Print the raw response document");

  auto* fleet = app.add_subcommand("fleet", "List registered machines");

  std::string agent;
  auto* machine = app.add_subcommand("machine", "Show one machine");
  machine->add_option("agent", agent)->required();

  std::string kind;
  auto* action = app.add_subcommand("action", "Issue SHUTDOWN, RESTART, LOGOFF or HIBERNATE");
  action->add_option("agent", agent)->required();
  action->add_option("kind", kind)->required();

  std::string on_off;
  auto* quarantine = app.add_subcommand("quarantine", "Exempt a machine from policy");
  quarantine->add_option("agent", agent)->required();
  quarantine->add_option("state", on_off)->required()->check(CLI::IsMember({"on", "off"}));

  std::string range;
  auto* scan = app.add_subcommand("scan", "Probe an address range");
  scan->add_option("range", range, "CIDR, a-b range or single address")->required();

  std::string address;
  std::string display_class = "OTHER";
  std::string power_model;
  auto* reg = app.add_subcommand("register", "Register a machine");
  reg->add_option("agent", agent)->required();
  reg->add_option("address", address)->required();
  reg->add_option("--display-class", display_class, "CRT, LCD or OTHER");
  reg->add_option("--power-model", power_model, "Power model key");

  std::string command_id;
  auto* command = app.add_subcommand("command", "Show one command");
  command->add_option("id", command_id)->required();

  std::string since;
  std::string until;
  std::string event_kind;
  auto* history = app.add_subcommand("history", "Query the event log");
  history->add_option("agent", agent, "Only events for this machine");
  history->add_option("--since", since, "Unix seconds, inclusive");
  history->add_option("--until", until, "Unix seconds, inclusive");
  history->add_option("--kind", event_kind, "Event kind, e.g. COMMAND_ISSUED");

  std::string baseline = "always-on";
  auto* energy = app.add_subcommand("energy", "Energy use against an always-on baseline");
  energy->add_option("--since", since, "Unix seconds");
  energy->add_option("--until", until, "Unix seconds");
  energy->add_option("--baseline", baseline)->check(CLI::IsMember({"always-on"}));

  CLI11_PARSE(app, argc, argv);

  try {
    ApiClient api(endpoint, token);
    json doc;
    std::function<void(const json&)> print;
    if (*fleet) {
      doc = api.get("/v1/fleet");
      print = print_fleet;
    } else if (*machine) {
      doc = api.get("/v1/machines/" + url_encode(agent));
      print = print_detail;
    } else if (*action) {
      doc = api.post("/v1/machines/" + url_encode(agent) + "/actions", {{"kind", kind}});
      print = print_command;
    } else if (*quarantine) {
      doc = api.post("/v1/machines/" + url_encode(agent) + "/quarantine", {{"on", on_off == "on"}});
      print = [](const json& m) {
        std::cout << m.at("agent").get<std::string>() << (m.at("quarantined").get<bool>() ? " quarantined" : " released")
                  << '\n';
      };
    } else if (*scan) {
      doc = api.post("/v1/scan", {{"range", range}});
      print = [](const json& d) {
        for (const auto& a : d.at("found")) std::cout << a.get<std::string>() << '\n';
      };
    } else if (*reg) {
      json body = {{"agent", agent}, {"address", address}, {"display_class", display_class}};
      if (!power_model.empty()) body["power_model"] = power_model;
      doc = api.post("/v1/machines", body);
      print = [](const json& m) {
        std::cout << "registered " << m.at("agent").get<std::string>() << " (" << m.at("power_model").get<std::string>()
                  << ")\n";
      };
    } else if (*command) {
      doc = api.get("/v1/commands/" + url_encode(command_id));
      print = print_command;
    } else if (*history) {
      doc = api.get("/v1/history" + query({{"agent", agent}, {"kind", event_kind}, {"since", since}, {"until", until}}));
      print = print_history;
    } else {
      doc = api.get("/v1/energy" + query({{"since", since}, {"until", until}}));
      print = print_energy;
    }
    if (as_json) {
      std::cout << doc.dump(2) << '\n';
    } else {
      print(doc);
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "fleetctl: " << to_string(e.code()) << ": " << e.what() << '\n';
    return 1;
  } catch (const json::exception& e) {
    std::cerr << "fleetctl: unexpected response: " << e.what() << '\n';
    return 1;
  }
}
