// SPDX-License-Identifier: Apache-2.0
#include "isoperi/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace isoperi {

namespace {

std::string fixed(double v, int digits = 2) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string tick_label(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Pt {
  double x, y;
};

std::vector<Pt> usable(const SvgSeries& s, bool log_y) {
  std::vector<Pt> pts;
  const std::size_t n = std::min(s.x.size(), s.y.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
    if (log_y && !(s.y[i] > 0.0)) continue;
    pts.push_back({s.x[i], log_y ? std::log10(s.y[i]) : s.y[i]});
  }
  constexpr std::size_t cap = 400;
  if (pts.size() > cap) {
    std::vector<Pt> thin;
    for (std::size_t k = 0; k < cap; ++k) thin.push_back(pts[k * (pts.size() - 1) / (cap - 1)]);
    pts = std::move(thin);
  }
  return pts;
}

}  // namespace

std::string render_svg(const SvgChart& chart) {
  const double left = 70, right = 20, top = 40, bottom = 55;
  const double pw = chart.width - left - right, ph = chart.height - top - bottom;
  std::vector<std::vector<Pt>> all;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : chart.series) {
    all.push_back(usable(s, chart.log_y));
    for (const Pt& p : all.back()) {
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y);
      y1 = std::max(y1, p.y);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
  if (chart.log_y) {
    y0 = std::floor(y0);
    y1 = std::ceil(y1);
  }
  if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
  const auto sx = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  const auto sy = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << chart.width << "\" height=\"" << chart.height
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << chart.width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" << escape(chart.title)
     << "</text>\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = x0 + (x1 - x0) * i / 5.0;
    os << "<line x1=\"" << fixed(sx(xv)) << "\" y1=\"" << top + ph << "\" x2=\"" << fixed(sx(xv)) << "\" y2=\""
       << top + ph + 4 << "\" stroke=\"#333\"/>";
    os << "<text x=\"" << fixed(sx(xv)) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">"
       << tick_label(xv) << "</text>\n";
  }
  const int y_ticks = chart.log_y ? static_cast<int>(std::min(8.0, y1 - y0)) : 5;
  for (int i = 0; i <= y_ticks; ++i) {
    const double yv = y0 + (y1 - y0) * i / std::max(y_ticks, 1);
    const std::string label = chart.log_y ? tick_label(std::pow(10.0, yv)) : tick_label(yv);
    os << "<line x1=\"" << left - 4 << "\" y1=\"" << fixed(sy(yv)) << "\" x2=\"" << left << "\" y2=\"" << fixed(sy(yv))
       << "\" stroke=\"#333\"/>";
    os << "<text x=\"" << left - 6 << "\" y=\"" << fixed(sy(yv) + 4) << "\" text-anchor=\"end\">" << label
       << "</text>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << chart.height - 12 << "\" text-anchor=\"middle\">"
     << escape(chart.x_label) << "</text>\n";
  os << "<text x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << top + ph / 2 << ")\">" << escape(chart.y_label) << (chart.log_y ? " (log)" : "") << "</text>\n";

  for (std::size_t k = 0; k < chart.series.size(); ++k) {
    const auto& s = chart.series[k];
    const auto& pts = all[k];
    if (pts.empty()) continue;
    os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\""
       << (s.dashed ? " stroke-dasharray=\"5,3\"" : "") << " points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (s.step && i > 0) os << fixed(sx(pts[i].x)) << ',' << fixed(sy(pts[i - 1].y)) << ' ';
      os << fixed(sx(pts[i].x)) << ',' << fixed(sy(pts[i].y)) << ' ';
    }
    os << "\"/>\n";
    const double ly = top + 14 + 14 * static_cast<double>(k);
    os << "<line x1=\"" << left + pw - 150 << "\" y1=\"" << ly << "\" x2=\"" << left + pw - 130 << "\" y2=\"" << ly
       << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"" << (s.dashed ? " stroke-dasharray=\"5,3\"" : "")
       << "/>";
    os << "<text x=\"" << left + pw - 125 << "\" y=\"" << ly + 4 << "\">" << escape(s.label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

SvgSeries empirical_tail(const std::vector<double>& values, double centre, const std::string& label) {
  SvgSeries s;
  s.label = label;
  s.step = true;
  std::vector<double> dev;
  dev.reserve(values.size());
  for (double v : values)
    if (std::isfinite(v)) dev.push_back(v - centre);
  std::sort(dev.begin(), dev.end());
  const double m = static_cast<double>(dev.size());
  for (std::size_t i = 0; i < dev.size(); ++i) {
    if (dev[i] < 0.0) continue;
    s.x.push_back(dev[i]);
    s.y.push_back((m - static_cast<double>(i)) / m);
  }
  return s;
}

}  // namespace isoperi
