#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "helper/routing/routing.hpp"
#include "helper/sim/scenario.hpp"

namespace helper::sim {

/// The SEEK-versus-greedy comparison: every session count, both routing
/// modes, `seeds` paired seeds each.
struct BatteryConfig {
  Scenario base = canonical_grid();
  /// Sessions are taken as prefixes of this list (1, 2, ... at a time).
  std::vector<Session> sessions = canonical_sessions();
  std::vector<std::size_t> session_counts{1, 2, 3, 4};
  std::vector<routing::Algorithm> modes{routing::Algorithm::kSeek, routing::Algorithm::kGreedy};
  std::size_t seeds = 20;
  std::uint64_t first_seed = 1;
  /// Packets per session in the delay study; 0 skips it.
  std::size_t delay_count = 100;
  /// Th_l; measured with calibrate_link_throughput when absent.
  std::optional<double> link_throughput_bps;
  /// Independent runs executed concurrently.
  unsigned workers = 1;
};

/// Parses a `schema: 1` battery document. `scenario` is an inline scenario
/// or, as a string, a scenario file path relative to `base_dir`; it defaults
/// to the canonical grid. `sessions` (node ids or labels of that scenario)
/// defaults to the scenario's own sessions, or the canonical four on the grid.
BatteryConfig battery_config_from_json(const nlohmann::json& doc, const std::string& base_dir = ".");
BatteryConfig load_battery_config(const std::string& path);

/// One measured value; `error` is set (and value is NaN) when the run failed.
struct BatteryRow {
  std::string scenario;
  routing::Algorithm mode = routing::Algorithm::kSeek;
  std::size_t sessions = 0;
  std::uint64_t seed = 0;
  std::string metric;
  double value = 0.0;
  std::string error;
};

struct BatterySummary {
  routing::Algorithm mode = routing::Algorithm::kSeek;
  std::size_t sessions = 0;
  std::string metric;
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t n = 0;
};

struct BatteryReport {
  double link_throughput_bps = 0.0;
  std::vector<BatteryRow> rows;
  std::vector<BatterySummary> summary;

  /// Seed mean of `metric`; NaN when no run produced it.
  double mean(routing::Algorithm mode, std::size_t sessions, const std::string& metric) const;
};

/// Metric names recorded per lifetime run and per delay run.
inline constexpr const char* kLifetimeMetric = "lifetime_s";
inline constexpr const char* kThroughputMetric = "network_throughput_bps";
inline constexpr const char* kNormalizedMetric = "normalized_throughput";
inline constexpr const char* kDeliveredMetric = "delivered";
inline constexpr const char* kSentMetric = "sent";
inline constexpr const char* kDelayMetric = "mean_delay_s";

/// Called after each finished run with (done, total).
using BatteryProgress = std::function<void(std::size_t, std::size_t)>;

BatteryReport run_battery(const BatteryConfig& cfg, const BatteryProgress& progress = {});

/// Mean and sample standard deviation per (mode, sessions, metric), skipping failed rows.
std::vector<BatterySummary> summarize(const std::vector<BatteryRow>& rows);

/// Writes battery.csv (one row per scenario, mode, seed, metric) and
/// battery_summary.csv. Returns the paths written.
std::vector<std::string> write_battery_csvs(const BatteryReport& report, const std::string& dir);

/// Line plots of lifetime, normalized throughput, delivered-packet gain and
/// delay against session count. Returns the paths written.
std::vector<std::string> write_battery_plots(const BatteryReport& report, const std::string& dir);

}  // namespace helper::sim
