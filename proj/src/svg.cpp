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

#include "vocablab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace vocablab::harness::svg {

namespace {

constexpr double kPi = 3.14159265358979323846;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

const char* color(std::size_t i) { return kPalette[i % (sizeof kPalette / sizeof kPalette[0])]; }

std::string header(int w, int h, const std::string& title) {
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
    << ' ' << h << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << w / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">" << esc(title) << "</text>\n";
  return o.str();
}

struct Range {
  double lo, hi;
};

Range nice_range(double lo, double hi) {
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

}  // namespace

std::string radar_chart(const std::string& title, const std::vector<std::string>& axes, const std::vector<Series>& series,
                        double max_value) {
  const int w = 560, h = 520;
  const double cx = 240, cy = 275, r = 190;
  std::ostringstream o;
  o << header(w, h, title);
  const std::size_t n = axes.size();
  auto at = [&](std::size_t i, double frac) {
    const double a = -kPi / 2 + 2 * kPi * static_cast<double>(i) / static_cast<double>(n);
    return std::pair<double, double>{cx + frac * r * std::cos(a), cy + frac * r * std::sin(a)};
  };
  for (int ring = 1; ring <= 4; ++ring) {
    o << "<polygon fill=\"none\" stroke=\"#ccc\" points=\"";
    for (std::size_t i = 0; i < n; ++i) {
      const auto [x, y] = at(i, ring / 4.0);
      o << num(x) << ',' << num(y) << ' ';
    }
    o << "\"/>\n";
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto [x, y] = at(i, 1.0);
    const auto [lx, ly] = at(i, 1.12);
    o << "<line x1=\"" << cx << "\" y1=\"" << cy << "\" x2=\"" << num(x) << "\" y2=\"" << num(y)
      << "\" stroke=\"#999\"/>\n<text x=\"" << num(lx) << "\" y=\"" << num(ly)
      << "\" text-anchor=\"middle\" dominant-baseline=\"middle\">" << esc(axes[i]) << "</text>\n";
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    o << "<polygon fill=\"" << color(s) << "\" fill-opacity=\"0.12\" stroke=\"" << color(s)
      << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < n && i < series[s].values.size(); ++i) {
      const double frac = std::clamp(series[s].values[i] / max_value, 0.0, 1.0);
      const auto [x, y] = at(i, frac);
      o << num(x) << ',' << num(y) << ' ';
    }
    o << "\"/>\n<text x=\"" << 470 << "\" y=\"" << 60 + 18 * s << "\" fill=\"" << color(s) << "\">"
      << esc(series[s].name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<double>& xs, const std::vector<Series>& series) {
  const int w = 600, h = 420;
  const double left = 60, right = 460, top = 40, bottom = 370;
  double ylo = 1e300, yhi = -1e300;
  for (const auto& s : series) {
    for (double v : s.values) {
      ylo = std::min(ylo, v);
      yhi = std::max(yhi, v);
    }
  }
  const Range yr = nice_range(series.empty() ? 0 : ylo, series.empty() ? 1 : yhi);
  const Range xr = nice_range(xs.empty() ? 0 : *std::min_element(xs.begin(), xs.end()),
                              xs.empty() ? 1 : *std::max_element(xs.begin(), xs.end()));
  auto px = [&](double x) { return left + (x - xr.lo) / (xr.hi - xr.lo) * (right - left); };
  auto py = [&](double y) { return bottom - (y - yr.lo) / (yr.hi - yr.lo) * (bottom - top); };
  std::ostringstream o;
  o << header(w, h, title);
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << right - left << "\" height=\"" << bottom - top
    << "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double yv = yr.lo + (yr.hi - yr.lo) * t / 4.0;
    o << "<text x=\"" << left - 6 << "\" y=\"" << num(py(yv)) << "\" text-anchor=\"end\">" << num(yv) << "</text>\n";
  }
  for (double x : xs) {
    o << "<text x=\"" << num(px(x)) << "\" y=\"" << bottom + 16 << "\" text-anchor=\"middle\">" << num(x)
      << "</text>\n";
  }
  o << "<text x=\"" << (left + right) / 2 << "\" y=\"" << h - 14 << "\" text-anchor=\"middle\">" << esc(x_label)
    << "</text>\n<text x=\"16\" y=\"" << (top + bottom) / 2 << "\" transform=\"rotate(-90 16 " << (top + bottom) / 2
    << ")\" text-anchor=\"middle\">" << esc(y_label) << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    o << "<polyline fill=\"none\" stroke=\"" << color(s) << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < xs.size() && i < series[s].values.size(); ++i) {
      o << num(px(xs[i])) << ',' << num(py(series[s].values[i])) << ' ';
    }
    o << "\"/>\n";
    for (std::size_t i = 0; i < xs.size() && i < series[s].values.size(); ++i) {
      o << "<circle cx=\"" << num(px(xs[i])) << "\" cy=\"" << num(py(series[s].values[i])) << "\" r=\"3\" fill=\""
        << color(s) << "\"/>\n";
    }
    o << "<text x=\"" << right + 12 << "\" y=\"" << top + 14 + 18 * s << "\" fill=\"" << color(s) << "\">"
      << esc(series[s].name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string scatter_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<Point>& points) {
  const int w = 560, h = 440;
  const double left = 60, right = 520, top = 40, bottom = 390;
  double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300;
  for (const auto& p : points) {
    xlo = std::min(xlo, p.x);
    xhi = std::max(xhi, p.x);
    ylo = std::min(ylo, p.y);
    yhi = std::max(yhi, p.y);
  }
  const Range xr = nice_range(points.empty() ? 0 : xlo, points.empty() ? 1 : xhi);
  const Range yr = nice_range(points.empty() ? 0 : ylo, points.empty() ? 1 : yhi);
  auto px = [&](double x) { return left + (x - xr.lo) / (xr.hi - xr.lo) * (right - left); };
  auto py = [&](double y) { return bottom - (y - yr.lo) / (yr.hi - yr.lo) * (bottom - top); };
  std::ostringstream o;
  o << header(w, h, title);
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << right - left << "\" height=\"" << bottom - top
    << "\" fill=\"none\" stroke=\"#333\"/>\n";
  o << "<text x=\"" << (left + right) / 2 << "\" y=\"" << h - 12 << "\" text-anchor=\"middle\">" << esc(x_label)
    << "</text>\n<text x=\"16\" y=\"" << (top + bottom) / 2 << "\" transform=\"rotate(-90 16 " << (top + bottom) / 2
    << ")\" text-anchor=\"middle\">" << esc(y_label) << "</text>\n";
  o << "<text x=\"" << left << "\" y=\"" << bottom + 16 << "\">" << num(xr.lo) << "</text><text x=\"" << right
    << "\" y=\"" << bottom + 16 << "\" text-anchor=\"end\">" << num(xr.hi) << "</text>\n";
  o << "<text x=\"" << left - 6 << "\" y=\"" << bottom << "\" text-anchor=\"end\">" << num(yr.lo) << "</text><text x=\""
    << left - 6 << "\" y=\"" << top + 10 << "\" text-anchor=\"end\">" << num(yr.hi) << "</text>\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    o << "<circle cx=\"" << num(px(points[i].x)) << "\" cy=\"" << num(py(points[i].y)) << "\" r=\"5\" fill=\""
      << color(i) << "\"/>\n<text x=\"" << num(px(points[i].x) + 8) << "\" y=\"" << num(py(points[i].y) - 6)
      << "\">" << esc(points[i].label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace vocablab::harness::svg
