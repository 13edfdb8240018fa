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

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vocablab/classes.hpp"
#include "vocablab/corpus.hpp"

namespace vocablab::render {

inline constexpr int kImageHeight = 32;
inline constexpr int kImageWidth = 128;
inline constexpr int kGlyphSize = 8;
// Trunk downsampling factor; segmentation maps live on this grid.
inline constexpr int kFeatureStride = 4;
inline constexpr int kFeatureHeight = kImageHeight / kFeatureStride;
inline constexpr int kFeatureWidth = kImageWidth / kFeatureStride;
inline constexpr double kDefaultShrink = 0.5;

// Axis-aligned box in pixel units, half-open: [x0, x1) x [y0, y1).
struct Box {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  bool operator==(const Box&) const = default;
};

struct StyleParams {
  int glyph_scale = 3;           // vertical magnification; horizontal shrinks to fit
  int spacing_px = 1;            // gap between glyph cells, +0/+1 jitter per gap
  double fg_mean = 0.85;
  double bg_mean = 0.20;
  double intensity_jitter = 0.05;  // per-image uniform offset on fg and bg
  double noise_sigma = 0.15;
  bool blur_enabled = true;

  void validate() const;
};

struct TextImage {
  std::vector<float> pixels;  // row-major kImageHeight x kImageWidth, in [0,1]
  std::string label;
  std::vector<Box> char_boxes;
  corpus::CorpusKind corpus_kind = corpus::CorpusKind::LS;

  float at(int y, int x) const { return pixels[static_cast<std::size_t>(y * kImageWidth + x)]; }
};

bool has_glyph(char c);
// 8 rows, bit k of each row is column k (leftmost = bit 0).
const std::uint8_t* glyph_rows(char c);

/// Draws `sample.text` left to right, picking the largest horizontal scale
/// (<= glyph_scale) that fits the canvas. Deterministic in (sample, style, seed).
TextImage rasterize(const corpus::WordSample& sample, const StyleParams& style, std::uint64_t seed);

/// Same centre, sides scaled by `factor`, never smaller than 1x1 pixel.
Box shrink_box(const Box& box, double factor);

/// Feature-grid cells (row, col) covered by `box`: cells whose centre falls
/// inside it, or the single cell holding the box centre when none does.
/// Empty only when the box lies off the grid.
std::vector<std::pair<int, int>> feature_region(const Box& box);

struct SegTarget {
  int height = kFeatureHeight;
  int width = kFeatureWidth;
  std::vector<int> classes;  // row-major

  int at(int r, int c) const { return classes[static_cast<std::size_t>(r * width + c)]; }
};

/// Class map on the feature grid: shrunken box of character i gets its
/// case-folded class, everything else background; later characters win.
SegTarget make_seg_target(const std::string& label, const std::vector<Box>& boxes, const ClassSet& classes,
                          double factor = kDefaultShrink);
SegTarget make_seg_target(const TextImage& img, const ClassSet& classes, double factor = kDefaultShrink);

std::vector<int> encode_label(std::string_view label, const ClassSet& classes, PredKind head);
std::string decode_label(const std::vector<int>& indices, const ClassSet& classes, PredKind head);

// 8-bit quantization shared by PGM files and in-memory datasets.
std::vector<std::uint8_t> quantize(const std::vector<float>& pixels);
void write_pgm(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes, int width = kImageWidth,
               int height = kImageHeight);
std::vector<std::uint8_t> read_pgm(const std::filesystem::path& path, int expected_width = kImageWidth,
                                   int expected_height = kImageHeight);

}  // namespace vocablab::render
