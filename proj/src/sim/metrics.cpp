#include "helper/sim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

namespace helper::sim {

double min_residual(const MetricsLog& log, double t) {
  std::map<NodeId, Energy> at = log.initial;
  for (const auto& s : log.energy) {
    if (s.t > t) break;
    at[s.node] = s.residual;
  }
  if (at.empty()) return 0.0;
  Energy lo = at.begin()->second;
  for (const auto& [node, e] : at) lo = std::min(lo, e);
  return lo.joules();
}

double network_lifetime(const MetricsLog& log) {
  double first = log.end_time;
  for (const auto& d : log.deaths) first = std::min(first, d.t);
  return first;
}

double network_throughput(const MetricsLog& log) {
  const double window = network_lifetime(log);
  if (!(window > 0.0)) return 0.0;
  double bits = 0.0;
  for (const auto& s : log.sessions) {
    const double per_packet = s.delivered ? static_cast<double>(s.delivered_bits) /
                                                static_cast<double>(s.delivered)
                                          : 0.0;
    for (double t : s.delivery_times) {
      if (t <= window) bits += per_packet;
    }
  }
  return bits / window;
}

double normalized_throughput(const MetricsLog& log, std::optional<double> link_throughput_bps) {
  if (!link_throughput_bps || !(*link_throughput_bps > 0.0)) {
    throw MetricsError("normalized throughput needs a link throughput calibration (run `calibrate`)");
  }
  return network_throughput(log) / *link_throughput_bps;
}

double mean_delay(const MetricsLog& log) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : log.sessions) {
    for (double l : s.latencies) {
      sum += l;
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

std::uint64_t total_sent(const MetricsLog& log) {
  std::uint64_t n = 0;
  for (const auto& s : log.sessions) n += s.sent;
  return n;
}

std::uint64_t total_delivered(const MetricsLog& log) {
  std::uint64_t n = 0;
  for (const auto& s : log.sessions) n += s.delivered;
  return n;
}

Energy tx_energy(const MetricsLog& log, NodeId node) {
  Energy sum;
  for (const auto& t : log.tx) {
    if (t.node == node) sum += t.cost;
  }
  return sum;
}

std::string fmt_num(double v, int decimals) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s(buf);
  if (s == "-0" || s.find_first_not_of("-0.") == std::string::npos) {
    // Normalize negative zero.
    if (!s.empty() && s[0] == '-') s.erase(0, 1);
  }
  return s;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

namespace {

class CsvFile {
 public:
  explicit CsvFile(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
  }
  template <typename... Fields>
  void row(const Fields&... fields) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(fields), first = false), ...);
    out_ << "\r\n";
  }

 private:
  static std::string cell(const std::string& s) { return csv_field(s); }
  static std::string cell(const char* s) { return csv_field(s); }
  static std::string cell(std::string_view s) { return csv_field(std::string(s)); }
  static std::string cell(double v) { return fmt_num(v); }
  static std::string cell(NodeId id) { return std::to_string(to_int(id)); }
  static std::string cell(bool b) { return b ? "1" : "0"; }
  template <typename T>
  static std::string cell(T v)
    requires std::is_integral_v<T>
  {
    return std::to_string(v);
  }

  std::ofstream out_;
};

}  // namespace

std::vector<std::string> write_run_csvs(const MetricsLog& log, const std::string& dir,
                                        std::optional<double> link_throughput_bps) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<std::string> written;
  auto path = [&](const char* name) {
    written.push_back((fs::path(dir) / name).string());
    return fs::path(dir) / name;
  };

  {
    CsvFile f(path("summary.csv"));
    f.row("metric", "value");
    f.row("scenario", log.scenario);
    f.row("routing", routing::to_string(log.routing));
    f.row("seed", log.seed);
    f.row("end_time_s", log.end_time);
    f.row("network_lifetime_s", network_lifetime(log));
    f.row("min_residual_end_j", min_residual(log, log.end_time));
    f.row("sent", total_sent(log));
    f.row("delivered", total_delivered(log));
    f.row("mean_delay_s", mean_delay(log));
    f.row("network_throughput_bps", network_throughput(log));
    if (link_throughput_bps && *link_throughput_bps > 0.0) {
      f.row("link_throughput_bps", *link_throughput_bps);
      f.row("normalized_throughput", normalized_throughput(log, link_throughput_bps));
    }
    f.row("tx_frames", log.tx.size());
    f.row("deaths", log.deaths.size());
  }
  {
    CsvFile f(path("sessions.csv"));
    f.row("session", "src", "dst", "sent", "delivered", "dropped", "outstanding",
          "mean_delay_s");
    for (std::size_t i = 0; i < log.sessions.size(); ++i) {
      const auto& s = log.sessions[i];
      double mean = 0.0;
      for (double l : s.latencies) mean += l;
      if (!s.latencies.empty()) mean /= static_cast<double>(s.latencies.size());
      f.row(i, s.src, s.dst, s.sent, s.delivered, s.dropped, s.outstanding(), mean);
    }
  }
  {
    CsvFile f(path("energy.csv"));
    f.row("t_s", "node", "residual_nj");
    for (const auto& e : log.energy) f.row(e.t, e.node, e.residual.nanojoules());
  }
  {
    CsvFile f(path("nodes.csv"));
    f.row("node", "initial_nj", "residual_nj", "tx_nj", "drained_nj");
    for (const auto& [node, init] : log.initial) {
      const auto res = log.residual.count(node) ? log.residual.at(node) : init;
      const auto drained = log.drained.count(node) ? log.drained.at(node) : Energy{};
      f.row(node, init.nanojoules(), res.nanojoules(), tx_energy(log, node).nanojoules(),
            drained.nanojoules());
    }
  }
  {
    CsvFile f(path("tx.csv"));
    f.row("t_s", "node", "kind", "app", "origin", "seq", "next_hop", "htl", "airtime_s",
          "cost_nj", "truncated");
    for (const auto& t : log.tx) {
      f.row(t.t, t.node, to_string(t.kind), to_string(t.app), t.origin, t.seq, t.next_hop,
            static_cast<unsigned>(t.htl), t.airtime, t.cost.nanojoules(), t.truncated);
    }
  }
  {
    CsvFile f(path("forwards.csv"));
    f.row("t_s", "node", "origin", "seq", "dest", "next_hop", "algorithm", "q_i", "q_j",
          "d_is_m", "d_js_m", "utility");
    for (const auto& r : log.forwards) {
      f.row(r.time, r.node, r.origin, r.seq, r.dest, r.next_hop, routing::to_string(r.algorithm),
            r.q_i, r.q_j, r.d_is, r.d_js, r.utility);
    }
  }
  {
    CsvFile f(path("deliveries.csv"));
    f.row("t_s", "node", "origin", "seq", "app", "unicast", "session", "latency_s");
    for (const auto& d : log.deliveries) {
      f.row(d.t, d.node, d.origin, d.seq, to_string(d.app), d.unicast, d.session, d.latency);
    }
  }
  {
    CsvFile f(path("service.csv"));
    f.row("t_s", "node", "event", "origin", "seq", "type", "text", "pending_id");
    for (const auto& e : log.service) {
      f.row(e.time, e.node, message::to_string(e.kind), e.origin, e.seq, to_string(e.message.type),
            e.message.text, e.pending_id);
    }
  }
  {
    CsvFile f(path("deaths.csv"));
    f.row("t_s", "node", "cause");
    for (const auto& d : log.deaths) f.row(d.t, d.node, d.cause);
  }
  return written;
}

}  // namespace helper::sim
