#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "idveil/util/csv.hpp"

namespace idveil {

struct PlotSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

namespace detail {

inline const char* plot_color(std::size_t i) {
  static const char* palette[] = {"#1b6ca8", "#c9403a", "#3a9647", "#8a56ac", "#c78a2d"};
  return palette[i % 5];
}

inline std::string fmt_tick(double v) { return csv_num(v); }

}  // namespace detail

// Renders line series as a self-contained SVG. Output is deterministic for
// identical input, so plot files can be compared byte for byte across runs.
inline std::string svg_line_chart(const std::vector<PlotSeries>& series, const std::string& title,
                                  const std::string& x_label, const std::string& y_label,
                                  int width = 640, int height = 440) {
  double x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;
  bool first = true;
  for (const PlotSeries& s : series) {
    for (const auto& [x, y] : s.points) {
      if (first) {
        x_min = x_max = x;
        y_min = y_max = y;
        first = false;
      }
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      y_min = std::min(y_min, y);
      y_max = std::max(y_max, y);
    }
  }
  if (x_max == x_min) x_max = x_min + 1.0;
  if (y_max == y_min) y_max = y_min + 1.0;

  const double pad_l = 60, pad_r = 20, pad_t = 40, pad_b = 50;
  const double pw = width - pad_l - pad_r;
  const double ph = height - pad_t - pad_b;
  auto sx = [&](double x) { return pad_l + (x - x_min) / (x_max - x_min) * pw; };
  auto sy = [&](double y) { return pad_t + ph - (y - y_min) / (y_max - y_min) * ph; };

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                    std::to_string(width) + "\" height=\"" + std::to_string(height) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + csv_num(width / 2.0) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" +
         title + "</text>\n";

  for (int i = 0; i <= 4; ++i) {
    const double fx = x_min + (x_max - x_min) * i / 4.0;
    const double fy = y_min + (y_max - y_min) * i / 4.0;
    svg += "<line x1=\"" + csv_num(sx(fx)) + "\" y1=\"" + csv_num(pad_t) + "\" x2=\"" +
           csv_num(sx(fx)) + "\" y2=\"" + csv_num(pad_t + ph) +
           "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    svg += "<line x1=\"" + csv_num(pad_l) + "\" y1=\"" + csv_num(sy(fy)) + "\" x2=\"" +
           csv_num(pad_l + pw) + "\" y2=\"" + csv_num(sy(fy)) +
           "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    svg += "<text x=\"" + csv_num(sx(fx)) + "\" y=\"" + csv_num(pad_t + ph + 18) +
           "\" text-anchor=\"middle\" font-size=\"11\">" + detail::fmt_tick(fx) + "</text>\n";
    svg += "<text x=\"" + csv_num(pad_l - 6) + "\" y=\"" + csv_num(sy(fy) + 4) +
           "\" text-anchor=\"end\" font-size=\"11\">" + detail::fmt_tick(fy) + "</text>\n";
  }
  svg += "<text x=\"" + csv_num(pad_l + pw / 2) + "\" y=\"" + csv_num(height - 10.0) +
         "\" text-anchor=\"middle\" font-size=\"13\">" + x_label + "</text>\n";
  svg += "<text x=\"16\" y=\"" + csv_num(pad_t + ph / 2) +
         "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 " +
         csv_num(pad_t + ph / 2) + ")\">" + y_label + "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const PlotSeries& s = series[si];
    if (s.points.empty()) continue;
    std::string path = "M";
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      if (i) path += " L";
      path += csv_num(sx(s.points[i].first)) + " " + csv_num(sy(s.points[i].second));
    }
    svg += "<path d=\"" + path + "\" fill=\"none\" stroke=\"" +
           detail::plot_color(si) + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + csv_num(pad_l + pw - 4) + "\" y=\"" +
           csv_num(pad_t + 16.0 * (si + 1)) + "\" text-anchor=\"end\" font-size=\"12\" fill=\"" +
           detail::plot_color(si) + "\">" + s.label + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

// Vertical bar chart for categorical values, same conventions as the line
// chart.
inline std::string svg_bar_chart(const std::vector<std::string>& labels,
                                 const std::vector<double>& values, const std::string& title,
                                 const std::string& y_label, int width = 640, int height = 440) {
  double y_max = 1.0;
  for (double v : values) y_max = std::max(y_max, v);

  const double pad_l = 60, pad_r = 20, pad_t = 40, pad_b = 60;
  const double pw = width - pad_l - pad_r;
  const double ph = height - pad_t - pad_b;
  const std::size_t n = values.size();
  const double slot = n ? pw / n : pw;

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                    std::to_string(width) + "\" height=\"" + std::to_string(height) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + csv_num(width / 2.0) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" +
         title + "</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fy = y_max * i / 4.0;
    const double y = pad_t + ph - fy / y_max * ph;
    svg += "<line x1=\"" + csv_num(pad_l) + "\" y1=\"" + csv_num(y) + "\" x2=\"" +
           csv_num(pad_l + pw) + "\" y2=\"" + csv_num(y) +
           "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    svg += "<text x=\"" + csv_num(pad_l - 6) + "\" y=\"" + csv_num(y + 4) +
           "\" text-anchor=\"end\" font-size=\"11\">" + detail::fmt_tick(fy) + "</text>\n";
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double h = values[i] / y_max * ph;
    const double x = pad_l + slot * i + slot * 0.15;
    svg += "<rect x=\"" + csv_num(x) + "\" y=\"" + csv_num(pad_t + ph - h) + "\" width=\"" +
           csv_num(slot * 0.7) + "\" height=\"" + csv_num(h) + "\" fill=\"" +
           detail::plot_color(i) + "\"/>\n";
    svg += "<text x=\"" + csv_num(pad_l + slot * i + slot / 2) + "\" y=\"" +
           csv_num(pad_t + ph + 18) + "\" text-anchor=\"middle\" font-size=\"11\">" +
           (i < labels.size() ? labels[i] : "") + "</text>\n";
  }
  svg += "<text x=\"16\" y=\"" + csv_num(pad_t + ph / 2) +
         "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 " +
         csv_num(pad_t + ph / 2) + ")\">" + y_label + "</text>\n";
  svg += "</svg>\n";
  return svg;
}

}  // namespace idveil
