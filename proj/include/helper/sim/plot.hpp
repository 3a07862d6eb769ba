#pragma once

#include <string>
#include <vector>

#include "helper/sim/metrics.hpp"

namespace helper::sim {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  /// Optional symmetric error bars, same length as y.
  std::vector<double> err;
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  /// Draw point markers (sparse data) or a bare polyline (time series).
  bool markers = true;
};

/// Self-contained SVG rendering; output depends only on the input.
std::string render_svg(const LinePlot& plot);

void write_svg(const LinePlot& plot, const std::string& path);

/// Per-run plots: minimum residual energy over time, each node's residual
/// energy, and cumulative session throughput. Returns the paths written.
std::vector<std::string> write_run_plots(const MetricsLog& log, const std::string& dir);

}  // namespace helper::sim
