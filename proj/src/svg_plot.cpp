#include "koopbound/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace koopbound {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 150.0;  // room for the legend
constexpr double kMarginTop = 20.0;
constexpr double kMarginBottom = 50.0;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string escape_xml(const std::string& s) {
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

}  // namespace

std::string emit_plot(const std::string& axis_name,
                      const std::vector<PlotSeries>& series) {
  if (series.empty()) throw std::invalid_argument("emit_plot: needs at least one series");
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin_log = std::numeric_limits<double>::infinity(), ymax_log = -ymin_log;
  for (const auto& s : series) {
    if (s.xs.size() != s.ys.size() || s.xs.size() < 2)
      throw std::invalid_argument("emit_plot: every series needs >= 2 points");
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      xmin = std::min(xmin, s.xs[i]);
      xmax = std::max(xmax, s.xs[i]);
      if (s.ys[i] > 0.0) {
        ymin_log = std::min(ymin_log, std::log10(s.ys[i]));
        ymax_log = std::max(ymax_log, std::log10(s.ys[i]));
      }
    }
  }
  if (!(xmax > xmin))
    throw std::invalid_argument("emit_plot: degenerate axis, all x values equal");
  if (!std::isfinite(ymin_log)) {
    // nothing positive anywhere; park the axis at a default decade
    ymin_log = 0.0;
    ymax_log = 1.0;
  }
  if (ymax_log - ymin_log < 1e-9) {
    ymin_log -= 0.5;
    ymax_log += 0.5;
  }

  double plot_w = kWidth - kMarginLeft - kMarginRight;
  double plot_h = kHeight - kMarginTop - kMarginBottom;
  auto px = [&](double x) {
    return kMarginLeft + (x - xmin) / (xmax - xmin) * plot_w;
  };
  auto py = [&](double y) {
    double t = (std::log10(y) - ymin_log) / (ymax_log - ymin_log);
    return kMarginTop + (1.0 - t) * plot_h;
  };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(kWidth)
      << "\" height=\"" << fmt(kHeight) << "\" viewBox=\"0 0 " << fmt(kWidth)
      << " " << fmt(kHeight) << "\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << fmt(kWidth) << "\" height=\""
      << fmt(kHeight) << "\" fill=\"white\"/>\n";
  // axes
  svg << "<line x1=\"" << fmt(kMarginLeft) << "\" y1=\"" << fmt(kMarginTop)
      << "\" x2=\"" << fmt(kMarginLeft) << "\" y2=\""
      << fmt(kMarginTop + plot_h) << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << fmt(kMarginLeft) << "\" y1=\""
      << fmt(kMarginTop + plot_h) << "\" x2=\"" << fmt(kMarginLeft + plot_w)
      << "\" y2=\"" << fmt(kMarginTop + plot_h) << "\" stroke=\"black\"/>\n";
  // ticks
  for (int t = 0; t <= 4; ++t) {
    double xv = xmin + (xmax - xmin) * t / 4.0;
    double xp = px(xv);
    svg << "<line x1=\"" << fmt(xp) << "\" y1=\"" << fmt(kMarginTop + plot_h)
        << "\" x2=\"" << fmt(xp) << "\" y2=\"" << fmt(kMarginTop + plot_h + 5)
        << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << fmt(xp) << "\" y=\"" << fmt(kMarginTop + plot_h + 18)
        << "\" font-size=\"11\" text-anchor=\"middle\">" << fmt(xv) << "</text>\n";
    double yl = ymin_log + (ymax_log - ymin_log) * t / 4.0;
    double yp = kMarginTop + (1.0 - static_cast<double>(t) / 4.0) * plot_h;
    svg << "<line x1=\"" << fmt(kMarginLeft - 5) << "\" y1=\"" << fmt(yp)
        << "\" x2=\"" << fmt(kMarginLeft) << "\" y2=\"" << fmt(yp)
        << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << fmt(kMarginLeft - 8) << "\" y=\"" << fmt(yp + 4)
        << "\" font-size=\"11\" text-anchor=\"end\">1e" << fmt(yl) << "</text>\n";
  }
  // axis labels
  svg << "<text x=\"" << fmt(kMarginLeft + plot_w / 2) << "\" y=\""
      << fmt(kHeight - 10) << "\" font-size=\"13\" text-anchor=\"middle\">"
      << escape_xml(axis_name) << "</text>\n";
  svg << "<text x=\"16\" y=\"" << fmt(kMarginTop + plot_h / 2)
      << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << fmt(kMarginTop + plot_h / 2) << ")\">bound value</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = kPalette[k % (sizeof(kPalette) / sizeof(kPalette[0]))];
    std::ostringstream pts;
    for (std::size_t i = 0; i < series[k].xs.size(); ++i) {
      if (!(series[k].ys[i] > 0.0)) continue;  // log axis
      if (pts.tellp() > 0) pts << " ";
      pts << fmt(px(series[k].xs[i])) << "," << fmt(py(series[k].ys[i]));
    }
    svg << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" points=\"" << pts.str() << "\"/>\n";
    // legend entry
    double ly = kMarginTop + 14.0 + 18.0 * static_cast<double>(k);
    svg << "<rect x=\"" << fmt(kMarginLeft + plot_w + 12) << "\" y=\""
        << fmt(ly - 8) << "\" width=\"10\" height=\"10\" fill=\"" << color
        << "\"/>\n";
    svg << "<text x=\"" << fmt(kMarginLeft + plot_w + 26) << "\" y=\""
        << fmt(ly + 1) << "\" font-size=\"11\">" << escape_xml(series[k].label)
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace koopbound
