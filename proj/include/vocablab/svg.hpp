/* Copyright 2026 The VocabLab Authors. All Rights Reserved.

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

#pragma once

#include <string>
#include <utility>
#include <vector>

namespace vocablab::harness::svg {

struct Series {
  std::string name;
  std::vector<double> values;
};

/// Spider chart, one polygon per series, every axis scaled to [0, max_value].
std::string radar_chart(const std::string& title, const std::vector<std::string>& axes, const std::vector<Series>& series,
                        double max_value = 100.0);

/// Polyline per series over shared x positions.
std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<double>& xs, const std::vector<Series>& series);

struct Point {
  std::string label;
  double x = 0, y = 0;
};
std::string scatter_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<Point>& points);

}  // namespace vocablab::harness::svg
