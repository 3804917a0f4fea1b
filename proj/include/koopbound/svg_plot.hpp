#pragma once

#include <string>
#include <vector>

namespace koopbound {

struct PlotSeries {
  std::string label;
  std::vector<double> xs;
  std::vector<double> ys;
};

// Self-contained SVG line chart, one polyline per series, log-scale y.
// Nonpositive y values cannot sit on a log axis and are dropped from their
// polyline. Output is deterministic for identical input. Throws when a series
// has fewer than two points or every x is identical.
std::string emit_plot(const std::string& axis_name,
                      const std::vector<PlotSeries>& series);

}  // namespace koopbound
