/* Copyright 2026 The Cadet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "cadet/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cadet/error.hpp"

namespace cadet::plot {
namespace {

constexpr int kW = 640, kH = 420;
constexpr int kL = 64, kR = 24, kT = 40, kB = 48;  // margins

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                         "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

void svg_header(std::ostream& os, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW
     << "\" height=\"" << kH << "\" viewBox=\"0 0 " << kW << " " << kH << "\">\n";
  os << "<rect width=\"" << kW << "\" height=\"" << kH << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        "font-family=\"sans-serif\" font-size=\"15\">" << title << "</text>\n";
}

}  // namespace

void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<Series>& series) {
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (first) {
        xmin = xmax = s.x[i];
        ymin = ymax = s.y[i];
        first = false;
      }
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const auto px = [&](double x) {
    return kL + (x - xmin) / (xmax - xmin) * (kW - kL - kR);
  };
  const auto py = [&](double y) {
    return kH - kB - (y - ymin) / (ymax - ymin) * (kH - kT - kB);
  };

  std::ofstream out(path);
  require(out.good(), "cannot write plot ", path);
  svg_header(out, title);
  out << "<rect x=\"" << kL << "\" y=\"" << kT << "\" width=\"" << kW - kL - kR
      << "\" height=\"" << kH - kT - kB
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int g = 0; g <= 4; ++g) {
    const double xv = xmin + (xmax - xmin) * g / 4.0;
    const double yv = ymin + (ymax - ymin) * g / 4.0;
    out << "<text x=\"" << px(xv) << "\" y=\"" << kH - kB + 18
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << fmt(xv) << "</text>\n";
    out << "<text x=\"" << kL - 8 << "\" y=\"" << py(yv) + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << fmt(yv) << "</text>\n";
  }
  out << "<text x=\"" << (kL + kW - kR) / 2 << "\" y=\"" << kH - 10
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
      << x_label << "</text>\n";
  out << "<text x=\"16\" y=\"" << (kT + kH - kB) / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
         "transform=\"rotate(-90 16 " << (kT + kH - kB) / 2 << ")\">"
      << y_label << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const Series& s = series[si];
    const char* color = kColors[si % 8];
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      out << px(s.x[i]) << "," << py(s.y[i]) << " ";
    out << "\"/>\n";
    out << "<text x=\"" << kW - kR - 6 << "\" y=\"" << kT + 16 + 16 * si
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" "
           "fill=\"" << color << "\">" << s.label << "</text>\n";
  }
  out << "</svg>\n";
}

void write_bar_chart(const std::string& path, const std::string& title,
                     const std::vector<std::string>& labels,
                     const std::vector<double>& values) {
  require(labels.size() == values.size(), "bar chart: labels/values mismatch");
  double ymax = 1e-9;
  for (double v : values) ymax = std::max(ymax, v);
  const double band = static_cast<double>(kW - kL - kR) / std::max<std::size_t>(1, values.size());

  std::ofstream out(path);
  require(out.good(), "cannot write plot ", path);
  svg_header(out, title);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double h = values[i] / ymax * (kH - kT - kB);
    const double x = kL + band * i + band * 0.15;
    const double y = kH - kB - h;
    out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << band * 0.7
        << "\" height=\"" << h << "\" fill=\"" << kColors[i % 8] << "\"/>\n";
    out << "<text x=\"" << x + band * 0.35 << "\" y=\"" << y - 4
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << fmt(values[i]) << "</text>\n";
    out << "<text x=\"" << x + band * 0.35 << "\" y=\"" << kH - kB + 16
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << labels[i] << "</text>\n";
  }
  out << "<line x1=\"" << kL << "\" y1=\"" << kH - kB << "\" x2=\"" << kW - kR
      << "\" y2=\"" << kH - kB << "\" stroke=\"#444\"/>\n";
  out << "</svg>\n";
}

}  // namespace cadet::plot
