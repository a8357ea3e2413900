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
#ifndef CADET_PLOT_HPP_
#define CADET_PLOT_HPP_

#include <string>
#include <vector>

namespace cadet::plot {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Small static SVG charts for PR curves, loss traces and ablation bars.
void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<Series>& series);

void write_bar_chart(const std::string& path, const std::string& title,
                     const std::vector<std::string>& labels,
                     const std::vector<double>& values);

}  // namespace cadet::plot

#endif  // CADET_PLOT_HPP_
