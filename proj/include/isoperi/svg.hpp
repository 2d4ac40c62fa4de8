// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace isoperi {

struct SvgSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  bool dashed = false;
  bool step = false;
};

struct SvgChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = true;
  int width = 640;
  int height = 420;
  std::vector<SvgSeries> series;
};

/// Self-contained SVG with axes, ticks and a legend. Non-positive y values
/// are dropped on a log axis; long series are thinned to 400 points.
std::string render_svg(const SvgChart& chart);

/// Empirical P(value - centre >= t) as a step series, evaluated at the
/// sorted deviations.
SvgSeries empirical_tail(const std::vector<double>& values, double centre, const std::string& label);

}  // namespace isoperi
