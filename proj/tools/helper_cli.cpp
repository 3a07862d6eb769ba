// helper: command-line entry point for the HELPER network simulator and
// emulation host.
//
//   helper validate <scenario.json>
//   helper run <scenario.json> [--routing seek|greedy] [--seed N] [--out dir] [--no-plots]
//   helper battery [battery.json] [--seeds N] [--workers N] [--out dir] [--no-plots]
//   helper calibrate [scenario.json] [--separation m] [--duration s] [--seed N]
//   helper serve [scenario.json] [--address a] [--port p] [--time-scale x]
//
// Exit codes: 0 ok, 2 usage, 3 scenario invalid, 4 runtime failure.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "helper/emu/server.hpp"
#include "helper/sim/battery.hpp"
#include "helper/sim/metrics.hpp"
#include "helper/sim/plot.hpp"
#include "helper/sim/simulator.hpp"

namespace {

using namespace helper;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitScenario = 3;
constexpr int kExitRuntime = 4;

struct CliConfig {
  std::string scenario_path;
  std::optional<std::string> routing;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "results";
  bool no_plots = false;
  std::optional<double> link_throughput_bps;
  // battery
  std::optional<std::size_t> seeds;
  std::optional<unsigned> workers;
  // calibrate
  double separation_m = 1000.0;
  double calibrate_duration_s = 600.0;
  // serve
  std::string address = "127.0.0.1";
  unsigned short port = 8765;
  double time_scale = 1.0;
};

/// Loads the scenario named on the command line (or the canonical grid when
/// none is given) and applies the routing / seed overrides.
sim::Scenario scenario_for(const CliConfig& cfg) {
  sim::Scenario sc = cfg.scenario_path.empty() ? sim::canonical_grid() : sim::load_scenario(cfg.scenario_path);
  if (cfg.routing) sc.routing = *routing::parse_algorithm(*cfg.routing);
  if (cfg.seed) sc.rng_seed = *cfg.seed;
  return sc;
}

void print_paths(const std::vector<std::string>& paths) {
  for (const auto& p : paths) std::printf("wrote %s\n", p.c_str());
}

int cmd_validate(const CliConfig& cfg) {
  const sim::Scenario sc = sim::load_scenario(cfg.scenario_path);
  std::printf("ok: %s (%zu nodes, %zu sessions, %zu injections, routing %s)\n", sc.name.c_str(),
              sc.nodes.size(), sc.sessions.size(), sc.injections.size(),
              std::string(routing::to_string(sc.routing)).c_str());
  return kExitOk;
}

int cmd_run(const CliConfig& cfg) {
  const sim::Scenario sc = scenario_for(cfg);
  const double th_l = cfg.link_throughput_bps ? *cfg.link_throughput_bps : sim::calibrate_link_throughput(sc);
  sim::Simulator simulator(sc);
  const sim::MetricsLog log = simulator.run();
  std::filesystem::create_directories(cfg.out_dir);
  print_paths(sim::write_run_csvs(log, cfg.out_dir, th_l));
  if (!cfg.no_plots) print_paths(sim::write_run_plots(log, cfg.out_dir));
  std::printf("%s routing=%s seed=%llu sent=%llu delivered=%llu lifetime=%.3f s normalized_throughput=%.4f\n",
              sc.name.c_str(), std::string(routing::to_string(sc.routing)).c_str(),
              static_cast<unsigned long long>(sc.rng_seed),
              static_cast<unsigned long long>(sim::total_sent(log)),
              static_cast<unsigned long long>(sim::total_delivered(log)), sim::network_lifetime(log),
              sim::normalized_throughput(log, th_l));
  return kExitOk;
}

int cmd_battery(const CliConfig& cfg) {
  sim::BatteryConfig bc = cfg.scenario_path.empty() ? sim::BatteryConfig{} : sim::load_battery_config(cfg.scenario_path);
  if (cfg.seeds) bc.seeds = *cfg.seeds;
  if (cfg.workers) bc.workers = *cfg.workers;
  if (cfg.link_throughput_bps) bc.link_throughput_bps = cfg.link_throughput_bps;
  const sim::BatteryReport report = sim::run_battery(bc, [](std::size_t done, std::size_t total) {
    std::fprintf(stderr, "\r%zu/%zu runs", done, total);
    if (done == total) std::fprintf(stderr, "\n");
  });
  std::filesystem::create_directories(cfg.out_dir);
  print_paths(sim::write_battery_csvs(report, cfg.out_dir));
  if (!cfg.no_plots) print_paths(sim::write_battery_plots(report, cfg.out_dir));

  std::size_t failed = 0;
  for (const auto& r : report.rows) failed += r.error.empty() ? 0 : 1;
  std::printf("link throughput %.1f bps\n", report.link_throughput_bps);
  std::printf("%-8s %8s %12s %12s %12s %12s\n", "mode", "sessions", "lifetime_s", "norm_thr",
              "delivered", "delay_s");
  for (auto mode : bc.modes) {
    for (auto k : bc.session_counts) {
      std::printf("%-8s %8zu %12.1f %12.4f %12.1f %12.2f\n",
                  std::string(routing::to_string(mode)).c_str(), k,
                  report.mean(mode, k, sim::kLifetimeMetric), report.mean(mode, k, sim::kNormalizedMetric),
                  report.mean(mode, k, sim::kDeliveredMetric), report.mean(mode, k, sim::kDelayMetric));
    }
  }
  if (failed > 0) {
    std::fprintf(stderr, "helper: %zu battery rows failed (see battery.csv)\n", failed);
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_calibrate(const CliConfig& cfg) {
  const sim::Scenario sc = scenario_for(cfg);
  const double th_l = sim::calibrate_link_throughput(sc, cfg.separation_m, cfg.calibrate_duration_s,
                                                     sc.rng_seed);
  std::printf("%.3f\n", th_l);
  return kExitOk;
}

int cmd_serve(const CliConfig& cfg) {
  emu::ServeOptions opt;
  opt.address = cfg.address;
  opt.port = cfg.port;
  opt.time_scale = cfg.time_scale;
  opt.log = [](const std::string& line) { std::fprintf(stderr, "%s\n", line.c_str()); };
  emu::EmuServer server(scenario_for(cfg), opt);
  server.start();
  server.wait();
  server.stop();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HELPER emergency ad hoc network: simulator, experiment battery and emulation host",
               "helper"};
  app.require_subcommand(1);
  CliConfig cfg;

  auto add_routing_seed = [&](CLI::App* sub) {
    sub->add_option("--routing", cfg.routing, "Override the scenario's routing mode")
        ->check(CLI::IsMember({"seek", "greedy"}));
    sub->add_option("--seed", cfg.seed, "Override the scenario's RNG seed");
  };

  auto* validate = app.add_subcommand("validate", "Check a scenario file without running it");
  validate->add_option("scenario", cfg.scenario_path, "Scenario JSON")->required();

  auto* run = app.add_subcommand("run", "Simulate one scenario and write CSVs and plots");
  run->add_option("scenario", cfg.scenario_path, "Scenario JSON")->required();
  add_routing_seed(run);
  run->add_option("--out", cfg.out_dir, "Output directory")->capture_default_str();
  run->add_flag("--no-plots", cfg.no_plots, "Write CSVs only");
  run->add_option("--link-throughput", cfg.link_throughput_bps,
                  "Point-to-point throughput (bps) for normalization; measured when omitted")
      ->check(CLI::PositiveNumber);

  auto* battery = app.add_subcommand("battery", "Run the SEEK-versus-greedy experiment battery");
  battery->add_option("config", cfg.scenario_path, "Battery JSON (defaults to the canonical grid battery)");
  battery->add_option("--seeds", cfg.seeds, "Seeds per configuration")->check(CLI::PositiveNumber);
  battery->add_option("--workers", cfg.workers, "Concurrent runs")->check(CLI::PositiveNumber);
  battery->add_option("--out", cfg.out_dir, "Output directory")->capture_default_str();
  battery->add_flag("--no-plots", cfg.no_plots, "Write CSVs only");
  battery->add_option("--link-throughput", cfg.link_throughput_bps,
                      "Point-to-point throughput (bps); measured when omitted")
      ->check(CLI::PositiveNumber);

  auto* calibrate = app.add_subcommand("calibrate", "Measure point-to-point link throughput (bps)");
  calibrate->add_option("scenario", cfg.scenario_path, "Scenario whose PHY/MAC settings to use");
  calibrate->add_option("--separation", cfg.separation_m, "Link length, meters")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  calibrate->add_option("--duration", cfg.calibrate_duration_s, "Simulated seconds")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  calibrate->add_option("--seed", cfg.seed, "RNG seed");

  auto* serve = app.add_subcommand("serve", "Emulate a scenario in wall-clock time over WebSocket");
  serve->add_option("scenario", cfg.scenario_path, "Scenario JSON (defaults to the canonical grid)");
  add_routing_seed(serve);
  serve->add_option("--address", cfg.address, "Bind address")->capture_default_str();
  serve->add_option("--port", cfg.port, "TCP port (0 picks a free one)")->capture_default_str();
  serve->add_option("--time-scale", cfg.time_scale, "Emulated seconds per wall second")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "helper: usage error: %s\n", e.what());
    return kExitUsage;
  }

  try {
    if (*validate) return cmd_validate(cfg);
    if (*run) return cmd_run(cfg);
    if (*battery) return cmd_battery(cfg);
    if (*calibrate) return cmd_calibrate(cfg);
    if (*serve) return cmd_serve(cfg);
  } catch (const sim::ScenarioError& e) {
    std::fprintf(stderr, "helper: invalid scenario: %s\n", e.what());
    return kExitScenario;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "helper: error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
