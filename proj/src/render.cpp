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

#include "vocablab/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include "vocablab/error.hpp"
#include "vocablab/rng.hpp"

namespace vocablab::render {
namespace {

struct Glyph {
  char c;
  std::array<std::uint8_t, 8> rows;
};

// Public-domain style 8x8 ASCII bitmaps, bit 0 = leftmost column.
constexpr Glyph kFont[] = {
    {'!', {0x18, 0x3C, 0x3C, 0x18, 0x18, 0x00, 0x18, 0x00}},
    {'\'', {0x06, 0x06, 0x03, 0x00, 0x00, 0x00, 0x00, 0x00}},
    {',', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C, 0x06}},
    {'-', {0x00, 0x00, 0x00, 0x3F, 0x00, 0x00, 0x00, 0x00}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C, 0x00}},
    {'?', {0x1E, 0x33, 0x30, 0x18, 0x0C, 0x00, 0x0C, 0x00}},
    {'0', {0x3E, 0x63, 0x73, 0x7B, 0x6F, 0x67, 0x3E, 0x00}},
    {'1', {0x0C, 0x0E, 0x0C, 0x0C, 0x0C, 0x0C, 0x3F, 0x00}},
    {'2', {0x1E, 0x33, 0x30, 0x1C, 0x06, 0x33, 0x3F, 0x00}},
    {'3', {0x1E, 0x33, 0x30, 0x1C, 0x30, 0x33, 0x1E, 0x00}},
    {'4', {0x38, 0x3C, 0x36, 0x33, 0x7F, 0x30, 0x78, 0x00}},
    {'5', {0x3F, 0x03, 0x1F, 0x30, 0x30, 0x33, 0x1E, 0x00}},
    {'6', {0x1C, 0x06, 0x03, 0x1F, 0x33, 0x33, 0x1E, 0x00}},
    {'7', {0x3F, 0x33, 0x30, 0x18, 0x0C, 0x0C, 0x0C, 0x00}},
    {'8', {0x1E, 0x33, 0x33, 0x1E, 0x33, 0x33, 0x1E, 0x00}},
    {'9', {0x1E, 0x33, 0x33, 0x3E, 0x30, 0x18, 0x0E, 0x00}},
    {'A', {0x0C, 0x1E, 0x33, 0x33, 0x3F, 0x33, 0x33, 0x00}},
    {'B', {0x3F, 0x66, 0x66, 0x3E, 0x66, 0x66, 0x3F, 0x00}},
    {'C', {0x3C, 0x66, 0x03, 0x03, 0x03, 0x66, 0x3C, 0x00}},
    {'D', {0x1F, 0x36, 0x66, 0x66, 0x66, 0x36, 0x1F, 0x00}},
    {'E', {0x7F, 0x46, 0x16, 0x1E, 0x16, 0x46, 0x7F, 0x00}},
    {'F', {0x7F, 0x46, 0x16, 0x1E, 0x16, 0x06, 0x0F, 0x00}},
    {'G', {0x3C, 0x66, 0x03, 0x03, 0x73, 0x66, 0x7C, 0x00}},
    {'H', {0x33, 0x33, 0x33, 0x3F, 0x33, 0x33, 0x33, 0x00}},
    {'I', {0x1E, 0x0C, 0x0C, 0x0C, 0x0C, 0x0C, 0x1E, 0x00}},
    {'J', {0x78, 0x30, 0x30, 0x30, 0x33, 0x33, 0x1E, 0x00}},
    {'K', {0x67, 0x66, 0x36, 0x1E, 0x36, 0x66, 0x67, 0x00}},
    {'L', {0x0F, 0x06, 0x06, 0x06, 0x46, 0x66, 0x7F, 0x00}},
    {'M', {0x63, 0x77, 0x7F, 0x7F, 0x6B, 0x63, 0x63, 0x00}},
    {'N', {0x63, 0x67, 0x6F, 0x7B, 0x73, 0x63, 0x63, 0x00}},
    {'O', {0x1C, 0x36, 0x63, 0x63, 0x63, 0x36, 0x1C, 0x00}},
    {'P', {0x3F, 0x66, 0x66, 0x3E, 0x06, 0x06, 0x0F, 0x00}},
    {'Q', {0x1E, 0x33, 0x33, 0x33, 0x3B, 0x1E, 0x38, 0x00}},
    {'R', {0x3F, 0x66, 0x66, 0x3E, 0x36, 0x66, 0x67, 0x00}},
    {'S', {0x1E, 0x33, 0x07, 0x0E, 0x38, 0x33, 0x1E, 0x00}},
    {'T', {0x3F, 0x2D, 0x0C, 0x0C, 0x0C, 0x0C, 0x1E, 0x00}},
    {'U', {0x33, 0x33, 0x33, 0x33, 0x33, 0x33, 0x3F, 0x00}},
    {'V', {0x33, 0x33, 0x33, 0x33, 0x33, 0x1E, 0x0C, 0x00}},
    {'W', {0x63, 0x63, 0x63, 0x6B, 0x7F, 0x77, 0x63, 0x00}},
    {'X', {0x63, 0x63, 0x36, 0x1C, 0x1C, 0x36, 0x63, 0x00}},
    {'Y', {0x33, 0x33, 0x33, 0x1E, 0x0C, 0x0C, 0x1E, 0x00}},
    {'Z', {0x7F, 0x63, 0x31, 0x18, 0x4C, 0x66, 0x7F, 0x00}},
    {'a', {0x00, 0x00, 0x1E, 0x30, 0x3E, 0x33, 0x6E, 0x00}},
    {'b', {0x07, 0x06, 0x06, 0x3E, 0x66, 0x66, 0x3B, 0x00}},
    {'c', {0x00, 0x00, 0x1E, 0x33, 0x03, 0x33, 0x1E, 0x00}},
    {'d', {0x38, 0x30, 0x30, 0x3E, 0x33, 0x33, 0x6E, 0x00}},
    {'e', {0x00, 0x00, 0x1E, 0x33, 0x3F, 0x03, 0x1E, 0x00}},
    {'f', {0x1C, 0x36, 0x06, 0x0F, 0x06, 0x06, 0x0F, 0x00}},
    {'g', {0x00, 0x00, 0x6E, 0x33, 0x33, 0x3E, 0x30, 0x1F}},
    {'h', {0x07, 0x06, 0x36, 0x6E, 0x66, 0x66, 0x67, 0x00}},
    {'i', {0x0C, 0x00, 0x0E, 0x0C, 0x0C, 0x0C, 0x1E, 0x00}},
    {'j', {0x30, 0x00, 0x30, 0x30, 0x30, 0x33, 0x33, 0x1E}},
    {'k', {0x07, 0x06, 0x66, 0x36, 0x1E, 0x36, 0x67, 0x00}},
    {'l', {0x0E, 0x0C, 0x0C, 0x0C, 0x0C, 0x0C, 0x1E, 0x00}},
    {'m', {0x00, 0x00, 0x33, 0x7F, 0x7F, 0x6B, 0x63, 0x00}},
    {'n', {0x00, 0x00, 0x1F, 0x33, 0x33, 0x33, 0x33, 0x00}},
    {'o', {0x00, 0x00, 0x1E, 0x33, 0x33, 0x33, 0x1E, 0x00}},
    {'p', {0x00, 0x00, 0x3B, 0x66, 0x66, 0x3E, 0x06, 0x0F}},
    {'q', {0x00, 0x00, 0x6E, 0x33, 0x33, 0x3E, 0x30, 0x78}},
    {'r', {0x00, 0x00, 0x3B, 0x6E, 0x66, 0x06, 0x0F, 0x00}},
    {'s', {0x00, 0x00, 0x3E, 0x03, 0x1E, 0x30, 0x1F, 0x00}},
    {'t', {0x08, 0x0C, 0x3E, 0x0C, 0x0C, 0x2C, 0x18, 0x00}},
    {'u', {0x00, 0x00, 0x33, 0x33, 0x33, 0x33, 0x6E, 0x00}},
    {'v', {0x00, 0x00, 0x33, 0x33, 0x33, 0x1E, 0x0C, 0x00}},
    {'w', {0x00, 0x00, 0x63, 0x6B, 0x7F, 0x7F, 0x36, 0x00}},
    {'x', {0x00, 0x00, 0x63, 0x36, 0x1C, 0x36, 0x63, 0x00}},
    {'y', {0x00, 0x00, 0x33, 0x33, 0x33, 0x3E, 0x30, 0x1F}},
    {'z', {0x00, 0x00, 0x3F, 0x19, 0x0C, 0x26, 0x3F, 0x00}},
};

const Glyph* find_glyph(char c) {
  for (const auto& g : kFont) {
    if (g.c == c) return &g;
  }
  return nullptr;
}

// Inclusive-exclusive ink extent of a glyph in glyph units.
struct InkExtent {
  int x0 = 8, y0 = 8, x1 = 0, y1 = 0;
};

InkExtent ink_extent(const Glyph& g) {
  InkExtent e;
  for (int r = 0; r < kGlyphSize; ++r) {
    for (int c = 0; c < kGlyphSize; ++c) {
      if ((g.rows[static_cast<std::size_t>(r)] >> c) & 1) {
        e.x0 = std::min(e.x0, c);
        e.x1 = std::max(e.x1, c + 1);
        e.y0 = std::min(e.y0, r);
        e.y1 = std::max(e.y1, r + 1);
      }
    }
  }
  return e;
}

void blur_121(std::vector<float>& img) {
  std::vector<float> tmp(img.size());
  for (int y = 0; y < kImageHeight; ++y) {
    for (int x = 0; x < kImageWidth; ++x) {
      const int xl = std::max(x - 1, 0), xr = std::min(x + 1, kImageWidth - 1);
      const auto row = static_cast<std::size_t>(y * kImageWidth);
      tmp[row + x] = 0.25f * img[row + xl] + 0.5f * img[row + x] + 0.25f * img[row + xr];
    }
  }
  for (int y = 0; y < kImageHeight; ++y) {
    const int yu = std::max(y - 1, 0), yd = std::min(y + 1, kImageHeight - 1);
    for (int x = 0; x < kImageWidth; ++x) {
      img[static_cast<std::size_t>(y * kImageWidth + x)] = 0.25f * tmp[static_cast<std::size_t>(yu * kImageWidth + x)] +
                                                         0.5f * tmp[static_cast<std::size_t>(y * kImageWidth + x)] +
                                                         0.25f * tmp[static_cast<std::size_t>(yd * kImageWidth + x)];
    }
  }
}

}  // namespace

void StyleParams::validate() const {
  if (glyph_scale < 1 || glyph_scale * kGlyphSize > kImageHeight) {
    throw Error(ErrorCode::InvalidInput, "glyph_scale must be in [1, 4]");
  }
  if (spacing_px < 0) throw Error(ErrorCode::InvalidInput, "spacing_px must be non-negative");
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(fg_mean) || !in_unit(bg_mean)) throw Error(ErrorCode::InvalidInput, "intensities must lie in [0,1]");
  if (std::abs(fg_mean - bg_mean) < 0.3) {
    throw Error(ErrorCode::InvalidInput, "foreground and background must differ by at least 0.3");
  }
  if (noise_sigma < 0.0 || intensity_jitter < 0.0) throw Error(ErrorCode::InvalidInput, "negative noise or jitter");
}

bool has_glyph(char c) { return find_glyph(c) != nullptr; }

const std::uint8_t* glyph_rows(char c) {
  const Glyph* g = find_glyph(c);
  return g ? g->rows.data() : nullptr;
}

TextImage rasterize(const corpus::WordSample& sample, const StyleParams& style, std::uint64_t seed) {
  style.validate();
  std::vector<const Glyph*> glyphs;
  for (char c : sample.text) {
    const Glyph* g = find_glyph(c);
    if (!g) throw Error(ErrorCode::UnsupportedGlyph, std::string("no glyph for character '") + c + "'");
    glyphs.push_back(g);
  }
  const int n = static_cast<int>(glyphs.size());

  Rng rng(seed);
  std::vector<int> gaps(static_cast<std::size_t>(std::max(n - 1, 0)));
  for (auto& g : gaps) g = style.spacing_px + static_cast<int>(rng.below(2));
  int gap_total = 0;
  for (int g : gaps) gap_total += g;

  int sx = style.glyph_scale;
  while (sx >= 1 && n * kGlyphSize * sx + gap_total > kImageWidth) --sx;
  if (sx < 1) {
    throw Error(ErrorCode::WordTooLong, "'" + sample.text + "' does not fit " + std::to_string(kImageWidth) + "px");
  }
  const int sy = style.glyph_scale;
  const int width = n * kGlyphSize * sx + gap_total;
  const int height = kGlyphSize * sy;
  const int x_start = static_cast<int>(rng.below(static_cast<std::uint64_t>(kImageWidth - width + 1)));
  const int y_slack = kImageHeight - height;
  const int y_start = y_slack / 2 + (y_slack > 0 ? static_cast<int>(rng.below(3)) - 1 : 0);
  const int y_top = std::clamp(y_start, 0, y_slack);

  const double fg = std::clamp(style.fg_mean + style.intensity_jitter * rng.uniform(-1.0, 1.0), 0.0, 1.0);
  const double bg = std::clamp(style.bg_mean + style.intensity_jitter * rng.uniform(-1.0, 1.0), 0.0, 1.0);

  TextImage img;
  img.label = sample.text;
  img.corpus_kind = sample.corpus_kind;
  img.pixels.assign(static_cast<std::size_t>(kImageHeight * kImageWidth), static_cast<float>(bg));

  int cell_x = x_start;
  for (int i = 0; i < n; ++i) {
    const Glyph& g = *glyphs[static_cast<std::size_t>(i)];
    for (int r = 0; r < kGlyphSize; ++r) {
      for (int c = 0; c < kGlyphSize; ++c) {
        if (!((g.rows[static_cast<std::size_t>(r)] >> c) & 1)) continue;
        for (int dy = 0; dy < sy; ++dy) {
          for (int dx = 0; dx < sx; ++dx) {
            const int y = y_top + r * sy + dy;
            const int x = cell_x + c * sx + dx;
            img.pixels[static_cast<std::size_t>(y * kImageWidth + x)] = static_cast<float>(fg);
          }
        }
      }
    }
    const InkExtent e = ink_extent(g);
    img.char_boxes.push_back(Box{static_cast<double>(cell_x + e.x0 * sx), static_cast<double>(y_top + e.y0 * sy),
                                 static_cast<double>(cell_x + e.x1 * sx), static_cast<double>(y_top + e.y1 * sy)});
    cell_x += kGlyphSize * sx + (i + 1 < n ? gaps[static_cast<std::size_t>(i)] : 0);
  }

  if (style.blur_enabled) blur_121(img.pixels);
  if (style.noise_sigma > 0.0) {
    for (auto& p : img.pixels) p = static_cast<float>(p + style.noise_sigma * rng.normal());
  }
  for (auto& p : img.pixels) p = std::clamp(p, 0.0f, 1.0f);
  return img;
}

Box shrink_box(const Box& box, double factor) {
  if (!(factor > 0.0 && factor <= 1.0)) {
    throw Error(ErrorCode::InvalidInput, "shrink factor must lie in (0,1]");
  }
  if (!(box.width() > 0.0 && box.height() > 0.0)) {
    throw Error(ErrorCode::DegenerateBox, "cannot shrink a zero-area box");
  }
  const double cx = 0.5 * (box.x0 + box.x1);
  const double cy = 0.5 * (box.y0 + box.y1);
  const double w = std::max(1.0, box.width() * factor);
  const double h = std::max(1.0, box.height() * factor);
  return Box{cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

std::vector<std::pair<int, int>> feature_region(const Box& box) {
  std::vector<std::pair<int, int>> cells;
  const double s = kFeatureStride;
  for (int r = 0; r < kFeatureHeight; ++r) {
    const double cy = (r + 0.5) * s;
    if (cy < box.y0 || cy >= box.y1) continue;
    for (int c = 0; c < kFeatureWidth; ++c) {
      const double cx = (c + 0.5) * s;
      if (cx >= box.x0 && cx < box.x1) cells.emplace_back(r, c);
    }
  }
  if (cells.empty()) {
    const int r = static_cast<int>(std::floor(0.5 * (box.y0 + box.y1) / s));
    const int c = static_cast<int>(std::floor(0.5 * (box.x0 + box.x1) / s));
    if (r >= 0 && r < kFeatureHeight && c >= 0 && c < kFeatureWidth) cells.emplace_back(r, c);
  }
  return cells;
}

SegTarget make_seg_target(const TextImage& img, const ClassSet& classes, double factor) {
  return make_seg_target(img.label, img.char_boxes, classes, factor);
}

SegTarget make_seg_target(const std::string& label, const std::vector<Box>& boxes, const ClassSet& classes,
                          double factor) {
  SegTarget t;
  t.classes.assign(static_cast<std::size_t>(t.height * t.width), classes.background_index());
  const std::size_t n = std::min(label.size(), boxes.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto cls = classes.index_of(label[i]);
    if (!cls) throw Error(ErrorCode::UnsupportedGlyph, std::string("character '") + label[i] + "' has no class");
    for (const auto& [r, c] : feature_region(shrink_box(boxes[i], factor))) {
      t.classes[static_cast<std::size_t>(r * t.width + c)] = *cls;
    }
  }
  return t;
}

std::vector<int> encode_label(std::string_view label, const ClassSet& classes, PredKind head) {
  std::vector<int> out;
  out.reserve(label.size() + 1);
  for (char c : label) {
    const auto idx = classes.index_of(c);
    if (!idx) throw Error(ErrorCode::UnsupportedGlyph, std::string("character '") + c + "' is outside the class set");
    out.push_back(*idx);
  }
  if (head == PredKind::ATTN) out.push_back(classes.eos_index());
  return out;
}

std::string decode_label(const std::vector<int>& indices, const ClassSet& classes, PredKind head) {
  std::string out;
  for (int idx : indices) {
    if (idx == ClassSet::kSpecial) {
      if (head == PredKind::ATTN) break;
      continue;
    }
    out.push_back(classes.char_of(idx));
  }
  return out;
}

std::vector<std::uint8_t> quantize(const std::vector<float>& pixels) {
  std::vector<std::uint8_t> out(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(pixels[i], 0.0f, 1.0f) * 255.0f));
  }
  return out;
}

void write_pgm(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes, int width, int height) {
  if (bytes.size() != static_cast<std::size_t>(width * height)) {
    throw Error(ErrorCode::InvalidInput, "write_pgm: pixel count does not match dimensions");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << "P5\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

std::vector<std::uint8_t> read_pgm(const std::filesystem::path& path, int expected_width, int expected_height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  in.get();
  if (magic != "P5" || maxval != 255) throw Error(ErrorCode::Format, path.string() + " is not an 8-bit binary PGM");
  if (w != expected_width || h != expected_height) {
    throw Error(ErrorCode::Format, path.string() + ": expected " + std::to_string(expected_width) + "x" +
                                       std::to_string(expected_height) + ", got " + std::to_string(w) + "x" +
                                       std::to_string(h));
  }
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(w * h));
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) throw Error(ErrorCode::Format, "truncated PGM " + path.string());
  return bytes;
}

}  // namespace vocablab::render
