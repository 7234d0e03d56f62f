#pragma once

#include <string>
#include <vector>

namespace covbound::cli {

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool connect = false;  ///< draw a polyline instead of markers
};

/// Self-contained SVG scatter/line chart with linear axes.
std::string render_svg(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<PlotSeries>& series);

}  // namespace covbound::cli
