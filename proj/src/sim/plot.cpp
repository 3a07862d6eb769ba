#include "helper/sim/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

namespace helper::sim {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 440.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 170.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Heckbert's "nice numbers" for axis ticks.
double nice(double range, bool round) {
  const double exp = std::floor(std::log10(range));
  const double f = range / std::pow(10.0, exp);
  double nf;
  if (round) {
    nf = f < 1.5 ? 1 : f < 3 ? 2 : f < 7 ? 5 : 10;
  } else {
    nf = f <= 1 ? 1 : f <= 2 ? 2 : f <= 5 ? 5 : 10;
  }
  return nf * std::pow(10.0, exp);
}

struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  double step = 0.2;
};

Axis make_axis(double lo, double hi) {
  if (!(hi > lo)) {
    const double pad = std::abs(lo) > 0 ? std::abs(lo) * 0.1 : 1.0;
    lo -= pad;
    hi += pad;
  }
  const double range = nice(hi - lo, false);
  const double step = nice(range / 5.0, true);
  return {std::floor(lo / step) * step, std::ceil(hi / step) * step, step};
}

}  // namespace

std::string render_svg(const LinePlot& plot) {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : plot.series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      const double e = i < s.err.size() && std::isfinite(s.err[i]) ? s.err[i] : 0.0;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i] - e);
      ymax = std::max(ymax, s.y[i] + e);
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  const Axis xa = make_axis(xmin, xmax);
  const Axis ya = make_axis(std::min(ymin, 0.0), ymax);

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xa.lo) / (xa.hi - xa.lo) * pw; };
  auto py = [&](double y) { return kTop + ph - (y - ya.lo) / (ya.hi - ya.lo) * ph; };

  std::string o;
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" +
       num(kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o += "<text x=\"" + num(kWidth / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" +
       escape(plot.title) + "</text>\n";

  for (double t = ya.lo; t <= ya.hi + ya.step * 1e-6; t += ya.step) {
    o += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(py(t)) + "\" x2=\"" + num(kLeft + pw) +
         "\" y2=\"" + num(py(t)) + "\" stroke=\"#e0e0e0\"/>\n";
    o += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(py(t) + 4) + "\" text-anchor=\"end\">" +
         label(t) + "</text>\n";
  }
  for (double t = xa.lo; t <= xa.hi + xa.step * 1e-6; t += xa.step) {
    o += "<line x1=\"" + num(px(t)) + "\" y1=\"" + num(kTop + ph) + "\" x2=\"" + num(px(t)) +
         "\" y2=\"" + num(kTop + ph + 5) + "\" stroke=\"black\"/>\n";
    o += "<text x=\"" + num(px(t)) + "\" y=\"" + num(kTop + ph + 18) +
         "\" text-anchor=\"middle\">" + label(t) + "</text>\n";
  }
  o += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(pw) +
       "\" height=\"" + num(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
  o += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kHeight - 16) +
       "\" text-anchor=\"middle\">" + escape(plot.x_label) + "</text>\n";
  o += "<text transform=\"translate(18," + num(kTop + ph / 2) +
       ") rotate(-90)\" text-anchor=\"middle\">" + escape(plot.y_label) + "</text>\n";

  for (std::size_t k = 0; k < plot.series.size(); ++k) {
    const auto& s = plot.series[k];
    const std::string color = kPalette[k % std::size(kPalette)];
    std::string pts;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      pts += num(px(s.x[i])) + "," + num(py(s.y[i])) + " ";
    }
    o += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\" points=\"" + pts +
         "\"/>\n";
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (i < s.err.size() && std::isfinite(s.err[i]) && s.err[i] > 0) {
        o += "<line x1=\"" + num(px(s.x[i])) + "\" y1=\"" + num(py(s.y[i] - s.err[i])) +
             "\" x2=\"" + num(px(s.x[i])) + "\" y2=\"" + num(py(s.y[i] + s.err[i])) +
             "\" stroke=\"" + color + "\"/>\n";
      }
      if (plot.markers) {
        o += "<circle cx=\"" + num(px(s.x[i])) + "\" cy=\"" + num(py(s.y[i])) +
             "\" r=\"3.5\" fill=\"" + color + "\"/>\n";
      }
    }
    const double ly = kTop + 14 + 20.0 * static_cast<double>(k);
    o += "<line x1=\"" + num(kLeft + pw + 14) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" +
         num(kLeft + pw + 38) + "\" y2=\"" + num(ly - 4) + "\" stroke=\"" + color +
         "\" stroke-width=\"2\"/>\n";
    o += "<text x=\"" + num(kLeft + pw + 44) + "\" y=\"" + num(ly) + "\">" + escape(s.name) +
         "</text>\n";
  }
  o += "</svg>\n";
  return o;
}

void write_svg(const LinePlot& plot, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << render_svg(plot);
}

std::vector<std::string> write_run_plots(const MetricsLog& log, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  constexpr int kSamples = 240;
  const double end = log.end_time > 0.0 ? log.end_time : 1.0;
  std::vector<double> ts;
  for (int i = 0; i <= kSamples; ++i) ts.push_back(end * i / kSamples);

  LinePlot emin{"Minimum residual energy", "time (s)", "E_r^min (J)", {}, false};
  Series s{std::string(routing::to_string(log.routing)), ts, {}, {}};
  for (double t : ts) s.y.push_back(min_residual(log, t));
  emin.series.push_back(std::move(s));

  LinePlot per_node{"Residual energy per node", "time (s)", "residual (J)", {}, false};
  std::map<NodeId, Series> by_node;
  for (const auto& [node, e] : log.initial) {
    by_node[node] = Series{"node " + std::to_string(to_int(node)), {0.0}, {e.joules()}, {}};
  }
  for (const auto& e : log.energy) {
    auto& series = by_node[e.node];
    if (!series.y.empty()) {
      series.x.push_back(e.t);
      series.y.push_back(series.y.back());
    }
    series.x.push_back(e.t);
    series.y.push_back(e.residual.joules());
  }
  for (auto& [node, series] : by_node) {
    series.x.push_back(end);
    series.y.push_back(series.y.empty() ? 0.0 : series.y.back());
    per_node.series.push_back(std::move(series));
  }

  LinePlot thr{"Session throughput", "time (s)", "delivered bits / elapsed s", {}, false};
  std::vector<std::pair<double, double>> bits;
  for (const auto& ses : log.sessions) {
    const double per = ses.delivered ? static_cast<double>(ses.delivered_bits) /
                                           static_cast<double>(ses.delivered)
                                     : 0.0;
    for (double t : ses.delivery_times) bits.emplace_back(t, per);
  }
  std::sort(bits.begin(), bits.end());
  Series ts_thr{std::string(routing::to_string(log.routing)), {}, {}, {}};
  double acc = 0.0;
  std::size_t k = 0;
  for (double t : ts) {
    if (!(t > 0.0)) continue;
    while (k < bits.size() && bits[k].first <= t) acc += bits[k++].second;
    ts_thr.x.push_back(t);
    ts_thr.y.push_back(acc / t);
  }
  thr.series.push_back(std::move(ts_thr));

  std::vector<std::string> written;
  for (const auto& [plot, name] : {std::pair{&emin, "min_residual.svg"},
                                   std::pair{&per_node, "residual_per_node.svg"},
                                   std::pair{&thr, "throughput.svg"}}) {
    const auto path = (fs::path(dir) / name).string();
    write_svg(*plot, path);
    written.push_back(path);
  }
  return written;
}

}  // namespace helper::sim
