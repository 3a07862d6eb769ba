#include "helper/sim/battery.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <thread>
#include <tuple>

#include "helper/sim/metrics.hpp"
#include "helper/sim/plot.hpp"
#include "helper/sim/simulator.hpp"

namespace helper::sim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Job {
  Scenario sc;
  std::size_t sessions = 0;
  bool delay_study = false;
};

std::vector<BatteryRow> measure(const Job& job, double th_l) {
  auto row = [&](const char* metric, double v) {
    return BatteryRow{job.sc.name, job.sc.routing, job.sessions, job.sc.rng_seed, metric, v, {}};
  };
  std::vector<const char*> metrics =
      job.delay_study ? std::vector<const char*>{kDelayMetric}
                      : std::vector<const char*>{kLifetimeMetric, kThroughputMetric,
                                                 kNormalizedMetric, kSentMetric, kDeliveredMetric};
  std::vector<BatteryRow> rows;
  try {
    Simulator sim(job.sc);
    const MetricsLog log = sim.run();
    if (job.delay_study) {
      rows.push_back(row(kDelayMetric, mean_delay(log)));
    } else {
      rows.push_back(row(kLifetimeMetric, network_lifetime(log)));
      rows.push_back(row(kThroughputMetric, network_throughput(log)));
      rows.push_back(row(kNormalizedMetric, normalized_throughput(log, th_l)));
      rows.push_back(row(kSentMetric, static_cast<double>(total_sent(log))));
      rows.push_back(row(kDeliveredMetric, static_cast<double>(total_delivered(log))));
    }
  } catch (const std::exception& e) {
    rows.clear();
    for (const char* m : metrics) {
      auto r = row(m, kNaN);
      r.error = e.what();
      rows.push_back(r);
    }
  }
  return rows;
}

std::vector<Job> plan(const BatteryConfig& cfg) {
  std::vector<Job> jobs;
  for (std::size_t k : cfg.session_counts) {
    if (k == 0 || k > cfg.sessions.size()) {
      throw std::invalid_argument("session count " + std::to_string(k) + " outside 1.." +
                                  std::to_string(cfg.sessions.size()));
    }
    for (int study = 0; study < (cfg.delay_count ? 2 : 1); ++study) {
      for (auto mode : cfg.modes) {
        for (std::size_t s = 0; s < cfg.seeds; ++s) {
          Job job;
          job.sessions = k;
          job.delay_study = study == 1;
          job.sc = cfg.base;
          job.sc.name = cfg.base.name + "-k" + std::to_string(k) + (job.delay_study ? "-delay" : "");
          job.sc.routing = mode;
          job.sc.rng_seed = cfg.first_seed + s;
          job.sc.sessions.assign(cfg.sessions.begin(),
                                 cfg.sessions.begin() + static_cast<std::ptrdiff_t>(k));
          if (job.delay_study) {
            for (auto& ses : job.sc.sessions) {
              ses.count = cfg.delay_count;
              ses.duration_s.reset();
            }
          }
          jobs.push_back(std::move(job));
        }
      }
    }
  }
  return jobs;
}

}  // namespace

BatteryConfig battery_config_from_json(const nlohmann::json& doc, const std::string& base_dir) {
  using nlohmann::json;
  try {
    if (!doc.is_object()) throw ScenarioError("battery config must be a JSON object");
    if (doc.value("schema", 0) != 1) throw ScenarioError("unsupported schema (expected \"schema\": 1)");
    BatteryConfig cfg;
    if (auto it = doc.find("scenario"); it != doc.end()) {
      if (it->is_string()) {
        const std::filesystem::path p(it->get<std::string>());
        cfg.base = load_scenario((p.is_absolute() ? p : std::filesystem::path(base_dir) / p).string());
      } else {
        cfg.base = scenario_from_json(*it);
      }
      cfg.sessions = cfg.base.sessions;
    }
    if (auto it = doc.find("sessions"); it != doc.end()) {
      // Resolve labels and validate against the base scenario's nodes.
      json probe = to_json(cfg.base);
      probe["sessions"] = *it;
      probe["injections"] = json::array();
      cfg.sessions = scenario_from_json(probe).sessions;
    }
    if (cfg.sessions.empty()) throw ScenarioError("battery needs at least one session");
    if (auto it = doc.find("session_counts"); it != doc.end()) {
      cfg.session_counts = it->get<std::vector<std::size_t>>();
    } else {
      cfg.session_counts.clear();
      for (std::size_t k = 1; k <= cfg.sessions.size(); ++k) cfg.session_counts.push_back(k);
    }
    for (auto k : cfg.session_counts) {
      if (k == 0 || k > cfg.sessions.size()) {
        throw ScenarioError("session count " + std::to_string(k) + " outside 1.." +
                            std::to_string(cfg.sessions.size()));
      }
    }
    if (auto it = doc.find("modes"); it != doc.end()) {
      cfg.modes.clear();
      for (const auto& m : *it) {
        auto algo = routing::parse_algorithm(m.get<std::string>());
        if (!algo) throw ScenarioError("modes must be \"seek\" or \"greedy\"");
        cfg.modes.push_back(*algo);
      }
    }
    cfg.seeds = doc.value("seeds", cfg.seeds);
    cfg.first_seed = doc.value("first_seed", cfg.first_seed);
    cfg.delay_count = doc.value("delay_count", cfg.delay_count);
    cfg.workers = doc.value("workers", cfg.workers);
    if (auto it = doc.find("link_throughput_bps"); it != doc.end() && !it->is_null()) {
      cfg.link_throughput_bps = it->get<double>();
      if (!(*cfg.link_throughput_bps > 0.0)) throw ScenarioError("link_throughput_bps must be positive");
    }
    if (cfg.seeds == 0) throw ScenarioError("seeds must be at least 1");
    if (cfg.workers == 0) throw ScenarioError("workers must be at least 1");
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(std::string("malformed battery config: ") + e.what());
  }
}

BatteryConfig load_battery_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot read " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(path + ": " + e.what());
  }
  return battery_config_from_json(doc, std::filesystem::path(path).parent_path().string());
}

double BatteryReport::mean(routing::Algorithm mode, std::size_t sessions,
                           const std::string& metric) const {
  for (const auto& s : summary) {
    if (s.mode == mode && s.sessions == sessions && s.metric == metric) return s.n ? s.mean : kNaN;
  }
  return kNaN;
}

BatteryReport run_battery(const BatteryConfig& cfg, const BatteryProgress& progress) {
  validate(cfg.base);
  BatteryReport report;
  report.link_throughput_bps =
      cfg.link_throughput_bps ? *cfg.link_throughput_bps : calibrate_link_throughput(cfg.base);

  const std::vector<Job> jobs = plan(cfg);
  std::vector<std::vector<BatteryRow>> results(jobs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      results[i] = measure(jobs[i], report.link_throughput_bps);
      const std::size_t d = ++done;
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(d, jobs.size());
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(cfg.workers, static_cast<unsigned>(jobs.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
  }
  for (auto& r : results) report.rows.insert(report.rows.end(), r.begin(), r.end());
  report.summary = summarize(report.rows);
  return report;
}

std::vector<BatterySummary> summarize(const std::vector<BatteryRow>& rows) {
  using Key = std::tuple<std::size_t, int, std::string>;
  std::map<Key, std::vector<double>> groups;
  std::vector<Key> order;
  for (const auto& r : rows) {
    Key key{r.sessions, static_cast<int>(r.mode), r.metric};
    auto [it, fresh] = groups.try_emplace(key);
    if (fresh) order.push_back(key);
    if (r.error.empty() && std::isfinite(r.value)) it->second.push_back(r.value);
  }
  std::vector<BatterySummary> out;
  for (const auto& key : order) {
    const auto& v = groups[key];
    BatterySummary s;
    s.sessions = std::get<0>(key);
    s.mode = static_cast<routing::Algorithm>(std::get<1>(key));
    s.metric = std::get<2>(key);
    s.n = v.size();
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = v.empty() ? kNaN : sum / static_cast<double>(v.size());
    double sq = 0.0;
    for (double x : v) sq += (x - s.mean) * (x - s.mean);
    s.stddev = v.size() > 1 ? std::sqrt(sq / static_cast<double>(v.size() - 1)) : 0.0;
    out.push_back(s);
  }
  return out;
}

std::vector<std::string> write_battery_csvs(const BatteryReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const auto rows_path = (fs::path(dir) / "battery.csv").string();
  const auto summary_path = (fs::path(dir) / "battery_summary.csv").string();
  {
    std::ofstream out(rows_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + rows_path);
    out << "scenario,mode,sessions,seed,metric,value,error\r\n";
    for (const auto& r : report.rows) {
      out << csv_field(r.scenario) << ',' << routing::to_string(r.mode) << ',' << r.sessions << ','
          << r.seed << ',' << r.metric << ',' << fmt_num(r.value) << ',' << csv_field(r.error)
          << "\r\n";
    }
  }
  {
    std::ofstream out(summary_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + summary_path);
    out << "mode,sessions,metric,mean,stddev,n\r\n";
    out << "-,0,link_throughput_bps," << fmt_num(report.link_throughput_bps) << ",0,1\r\n";
    for (const auto& s : report.summary) {
      out << routing::to_string(s.mode) << ',' << s.sessions << ',' << s.metric << ','
          << fmt_num(s.mean) << ',' << fmt_num(s.stddev) << ',' << s.n << "\r\n";
    }
  }
  return {rows_path, summary_path};
}

std::vector<std::string> write_battery_plots(const BatteryReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<std::size_t> counts;
  std::vector<routing::Algorithm> modes;
  for (const auto& s : report.summary) {
    if (std::find(counts.begin(), counts.end(), s.sessions) == counts.end()) counts.push_back(s.sessions);
    if (std::find(modes.begin(), modes.end(), s.mode) == modes.end()) modes.push_back(s.mode);
  }
  std::sort(counts.begin(), counts.end());

  auto per_mode = [&](const char* metric, const char* title, const char* y_label) {
    LinePlot plot{title, "sessions", y_label, {}, true};
    for (auto mode : modes) {
      Series s{std::string(routing::to_string(mode)), {}, {}, {}};
      for (std::size_t k : counts) {
        for (const auto& row : report.summary) {
          if (row.mode != mode || row.sessions != k || row.metric != metric) continue;
          s.x.push_back(static_cast<double>(k));
          s.y.push_back(row.mean);
          s.err.push_back(row.stddev);
        }
      }
      plot.series.push_back(std::move(s));
    }
    return plot;
  };

  std::vector<std::string> written;
  auto emit = [&](const LinePlot& plot, const char* name) {
    const auto path = (fs::path(dir) / name).string();
    write_svg(plot, path);
    written.push_back(path);
  };
  emit(per_mode(kLifetimeMetric, "Network lifetime vs sessions", "first node death (s)"),
       "lifetime.svg");
  emit(per_mode(kNormalizedMetric, "Normalized network throughput vs sessions", "Th_net / Th_l"),
       "normalized_throughput.svg");
  emit(per_mode(kDelayMetric, "Average packet delay vs sessions", "delay (s)"), "delay.svg");

  LinePlot gain{"Packets delivered: SEEK gain over greedy", "sessions", "gain (%)", {}, true};
  Series g{"seek vs greedy", {}, {}, {}};
  for (std::size_t k : counts) {
    const double a = report.mean(routing::Algorithm::kSeek, k, kDeliveredMetric);
    const double b = report.mean(routing::Algorithm::kGreedy, k, kDeliveredMetric);
    if (!std::isfinite(a) || !std::isfinite(b) || !(b > 0.0)) continue;
    g.x.push_back(static_cast<double>(k));
    g.y.push_back(100.0 * (a - b) / b);
  }
  gain.series.push_back(std::move(g));
  emit(gain, "delivered_gain.svg");
  return written;
}

}  // namespace helper::sim
