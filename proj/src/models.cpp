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

#include "vocablab/models.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "vocablab/error.hpp"
#include "vocablab/rng.hpp"

namespace vocablab::models {

using ad::Shape;
using ad::Tensor;
using json = nlohmann::json;

namespace {

constexpr int kClasses = ClassSet::kNumClasses;
constexpr int kSpecial = ClassSet::kSpecial;
constexpr int kGoToken = kClasses;  // extra embedding row for the first decode step

void require_config(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::InvalidConfig, what);
}

int argmax(const double* v, int n) {
  return static_cast<int>(std::max_element(v, v + n) - v);
}

}  // namespace

std::string_view to_string(PredKind kind) {
  switch (kind) {
    case PredKind::CTC: return "ctc";
    case PredKind::ATTN: return "attn";
    case PredKind::SEG: return "seg";
  }
  return "?";
}

std::string_view to_string(CntxKind kind) {
  switch (kind) {
    case CntxKind::NONE: return "none";
    case CntxKind::BLSTM: return "blstm";
    case CntxKind::PPM: return "ppm";
  }
  return "?";
}

PredKind parse_pred_kind(std::string_view s) {
  if (s == "ctc") return PredKind::CTC;
  if (s == "attn") return PredKind::ATTN;
  if (s == "seg") return PredKind::SEG;
  throw Error(ErrorCode::InvalidConfig, "unknown prediction head '" + std::string(s) + "'");
}

CntxKind parse_cntx_kind(std::string_view s) {
  if (s == "none") return CntxKind::NONE;
  if (s == "blstm") return CntxKind::BLSTM;
  if (s == "ppm") return CntxKind::PPM;
  throw Error(ErrorCode::InvalidConfig, "unknown context module '" + std::string(s) + "'");
}

void ModelConfig::validate() const {
  require_config(!(pred == PredKind::SEG && cntx == CntxKind::BLSTM),
                 "segmentation head cannot follow a BLSTM context (it needs a 2-D map)");
  require_config(trunk_channels.size() >= 2, "trunk needs at least two conv blocks");
  for (int c : trunk_channels) require_config(c > 0, "trunk channel counts must be positive");
  require_config(blstm_hidden > 0 && attn_hidden > 0 && attn_embed > 0 && attn_dim > 0, "hidden sizes must be positive");
  require_config(!ppm_pool_sizes.empty(), "PPM needs at least one pool size");
  for (int p : ppm_pool_sizes) require_config(p > 0, "PPM pool sizes must be positive");
  require_config(max_decode_steps > 0, "max_decode_steps must be positive");
}

std::string ModelConfig::to_json() const {
  json j;
  j["pred"] = std::string(models::to_string(pred));
  j["cntx"] = std::string(models::to_string(cntx));
  j["dims"] = {{"trunk_channels", trunk_channels}, {"blstm_hidden", blstm_hidden}, {"attn_hidden", attn_hidden},
               {"attn_embed", attn_embed},         {"attn_dim", attn_dim},         {"ppm_pool_sizes", ppm_pool_sizes},
               {"max_decode_steps", max_decode_steps}};
  j["seed"] = seed;
  j["classes"] = ClassSet::standard().signature();
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  ModelConfig c;
  try {
    const json j = json::parse(text);
    if (j.contains("classes") && j["classes"].get<std::string>() != ClassSet::standard().signature()) {
      throw Error(ErrorCode::ClassSetMismatch, "model was trained with a different class set");
    }
    c.pred = parse_pred_kind(j.at("pred").get<std::string>());
    c.cntx = parse_cntx_kind(j.at("cntx").get<std::string>());
    if (j.contains("dims")) {
      const auto& d = j["dims"];
      c.trunk_channels = d.value("trunk_channels", c.trunk_channels);
      c.blstm_hidden = d.value("blstm_hidden", c.blstm_hidden);
      c.attn_hidden = d.value("attn_hidden", c.attn_hidden);
      c.attn_embed = d.value("attn_embed", c.attn_embed);
      c.attn_dim = d.value("attn_dim", c.attn_dim);
      c.ppm_pool_sizes = d.value("ppm_pool_sizes", c.ppm_pool_sizes);
      c.max_decode_steps = d.value("max_decode_steps", c.max_decode_steps);
    }
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---- LogitSequence / Batch --------------------------------------------------------

LogitSequence::LogitSequence(int len, int k)
    : length(len), classes(k), scores(static_cast<std::size_t>(len) * k, 0.0), present(len, 1) {}

LogitSequence LogitSequence::from_rows(const std::vector<std::vector<double>>& rows) {
  const int k = rows.empty() ? 0 : static_cast<int>(rows.front().size());
  LogitSequence s(static_cast<int>(rows.size()), k);
  for (int i = 0; i < s.length; ++i) {
    if (static_cast<int>(rows[i].size()) != k) throw Error(ErrorCode::ShapeMismatch, "ragged logit rows");
    std::copy(rows[i].begin(), rows[i].end(), s.scores.begin() + static_cast<std::ptrdiff_t>(i) * k);
  }
  return s;
}

Tensor Batch::images() const {
  return Tensor::from({size, 1, render::kImageHeight, render::kImageWidth}, pixels);
}

// ---- standalone head operations ---------------------------------------------------

double ctc_loss(const LogitSequence& frames, const std::vector<int>& label, int blank) {
  return ad::ctc_forward_backward(frames.scores.data(), frames.length, frames.classes, label, blank, false).nll;
}

std::string ctc_greedy_decode(const LogitSequence& frames, const ClassSet& classes) {
  std::string out;
  int prev = -1;
  for (int t = 0; t < frames.length; ++t) {
    const int k = argmax(frames.row(t), frames.classes);
    if (k != prev && k != classes.blank_index()) out.push_back(classes.char_of(k));
    prev = k;
  }
  return out;
}

double attn_loss(const LogitSequence& logits, const std::vector<int>& targets) {
  if (targets.empty() || static_cast<int>(targets.size()) > logits.length) {
    throw Error(ErrorCode::ShapeMismatch, "attn_loss: " + std::to_string(targets.size()) + " targets for " +
                                              std::to_string(logits.length) + " steps");
  }
  double total = 0.0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const double* z = logits.row(static_cast<int>(t));
    const double mx = *std::max_element(z, z + logits.classes);
    double s = 0.0;
    for (int k = 0; k < logits.classes; ++k) s += std::exp(z[k] - mx);
    total += mx + std::log(s) - z[targets[t]];
  }
  return total / static_cast<double>(targets.size());
}

std::string attn_greedy_decode(const LogitSequence& steps, const ClassSet& classes) {
  std::string out;
  for (int t = 0; t < steps.length; ++t) {
    const int k = argmax(steps.row(t), steps.classes);
    if (k == classes.eos_index()) break;
    out.push_back(classes.char_of(k));
  }
  return out;
}

SegDecoding seg_decode(const std::vector<double>& logits, int channels, int height, int width, const ClassSet& classes) {
  const std::size_t hw = static_cast<std::size_t>(height) * width;
  if (logits.size() != hw * channels || channels != ClassSet::kNumClasses) {
    throw Error(ErrorCode::ShapeMismatch, "seg_decode: expected " + std::to_string(ClassSet::kNumClasses) +
                                              " channels over " + std::to_string(height) + "x" + std::to_string(width));
  }
  const int bg = classes.background_index();
  std::vector<int> arg(hw);
  for (std::size_t p = 0; p < hw; ++p) {
    int best = 0;
    for (int k = 1; k < channels; ++k) {
      if (logits[k * hw + p] > logits[best * hw + p]) best = k;
    }
    arg[p] = best;
  }

  struct Component {
    std::vector<std::pair<int, int>> cells;
    int min_x, min_y;
    std::size_t first;  // raster index of the first pixel, a final unique tie-break
  };
  std::vector<Component> comps;
  std::vector<char> seen(hw, 0);
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < hw; ++start) {
    if (seen[start] || arg[start] == bg) continue;
    Component c{{}, width, height, start};
    stack.assign(1, start);
    seen[start] = 1;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const int r = static_cast<int>(p / width), col = static_cast<int>(p % width);
      c.cells.emplace_back(r, col);
      c.min_x = std::min(c.min_x, col);
      c.min_y = std::min(c.min_y, r);
      const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
      for (int d = 0; d < 4; ++d) {
        const int nr = r + dr[d], nc = col + dc[d];
        if (nr < 0 || nr >= height || nc < 0 || nc >= width) continue;
        const std::size_t q = static_cast<std::size_t>(nr) * width + nc;
        if (!seen[q] && arg[q] != bg) {
          seen[q] = 1;
          stack.push_back(q);
        }
      }
    }
    if (c.cells.size() >= kMinComponentPixels) comps.push_back(std::move(c));
  }
  std::sort(comps.begin(), comps.end(), [](const Component& a, const Component& b) {
    if (a.min_x != b.min_x) return a.min_x < b.min_x;
    if (a.min_y != b.min_y) return a.min_y < b.min_y;
    if (a.cells.size() != b.cells.size()) return a.cells.size() > b.cells.size();
    return a.first < b.first;
  });

  SegDecoding out;
  for (auto& c : comps) {
    std::vector<double> mean(ClassSet::kNumChars, 0.0);
    for (const auto& [r, col] : c.cells) {
      const std::size_t p = static_cast<std::size_t>(r) * width + col;
      for (int k = 0; k < ClassSet::kNumChars; ++k) mean[k] += logits[k * hw + p];
    }
    const int cls = argmax(mean.data(), ClassSet::kNumChars);
    std::sort(c.cells.begin(), c.cells.end());
    out.text.push_back(classes.char_of(cls));
    out.regions.push_back(SegRegion{classes.char_of(cls), cls, c.min_x, c.min_y, std::move(c.cells)});
  }
  return out;
}

LogitSequence seg_vote(const std::vector<double>& logits, int channels, int height, int width,
                       const std::vector<std::vector<std::pair<int, int>>>& regions) {
  const std::size_t hw = static_cast<std::size_t>(height) * width;
  if (logits.size() != hw * channels) throw Error(ErrorCode::ShapeMismatch, "seg_vote: logit map size mismatch");
  LogitSequence out(static_cast<int>(regions.size()), channels);
  for (int i = 0; i < out.length; ++i) {
    const auto& cells = regions[i];
    if (cells.empty()) {
      out.present[i] = 0;
      continue;
    }
    for (const auto& [r, c] : cells) {
      if (r < 0 || r >= height || c < 0 || c >= width) throw Error(ErrorCode::InvalidInput, "seg_vote: cell outside map");
      const std::size_t p = static_cast<std::size_t>(r) * width + c;
      for (int k = 0; k < channels; ++k) out.at(i, k) += logits[k * hw + p];
    }
    for (int k = 0; k < channels; ++k) out.at(i, k) /= static_cast<double>(cells.size());
  }
  return out;
}

std::vector<std::vector<std::pair<int, int>>> char_regions(const std::vector<render::Box>& boxes, double factor) {
  std::vector<std::vector<std::pair<int, int>>> out;
  out.reserve(boxes.size());
  for (const auto& b : boxes) {
    try {
      out.push_back(render::feature_region(render::shrink_box(b, factor)));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateBox) throw;
      out.emplace_back();
    }
  }
  return out;
}

// ---- tensor losses -----------------------------------------------------------------

Tensor sequence_cross_entropy(const Tensor& logits, const std::vector<std::vector<int>>& targets) {
  if (logits.rank() != 3 || static_cast<std::size_t>(logits.dim(0)) != targets.size()) {
    throw Error(ErrorCode::ShapeMismatch, "sequence_cross_entropy: logits " + ad::shape_str(logits.shape()));
  }
  const int n = logits.dim(0), s = logits.dim(1), k = logits.dim(2);
  std::vector<int> flat(static_cast<std::size_t>(n) * s, -1);
  std::vector<double> weight(flat.size(), 0.0);
  for (int i = 0; i < n; ++i) {
    const auto& t = targets[i];
    if (t.empty() || static_cast<int>(t.size()) > s) {
      throw Error(ErrorCode::ShapeMismatch, "sequence_cross_entropy: target length " + std::to_string(t.size()) +
                                                " vs " + std::to_string(s) + " steps");
    }
    for (std::size_t j = 0; j < t.size(); ++j) {
      flat[static_cast<std::size_t>(i) * s + j] = t[j];
      weight[static_cast<std::size_t>(i) * s + j] = 1.0 / (static_cast<double>(t.size()) * n);
    }
  }
  return ad::nll(ad::log_softmax(ad::reshape(logits, {n * s, k})), flat, weight);
}

Tensor pixel_cross_entropy(const Tensor& logits, const std::vector<render::SegTarget>& targets) {
  if (logits.rank() != 4 || static_cast<std::size_t>(logits.dim(0)) != targets.size()) {
    throw Error(ErrorCode::ShapeMismatch, "pixel_cross_entropy: logits " + ad::shape_str(logits.shape()));
  }
  const int n = logits.dim(0), k = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  std::vector<int> flat;
  flat.reserve(n * hw);
  for (const auto& t : targets) {
    if (t.height != h || t.width != w) throw Error(ErrorCode::ShapeMismatch, "pixel_cross_entropy: target grid");
    flat.insert(flat.end(), t.classes.begin(), t.classes.end());
  }
  const std::vector<double> weight(flat.size(), 1.0 / static_cast<double>(flat.size()));
  const Tensor rows = ad::reshape(ad::permute(logits, {0, 2, 3, 1}), {static_cast<int>(n * hw), k});
  return ad::nll(ad::log_softmax(rows), flat, weight);
}

// ---- Recognizer --------------------------------------------------------------------

Recognizer::Recognizer(const ModelConfig& config) : config_(config) {
  config_.validate();
  const auto& ch = config_.trunk_channels;
  int in = 1;
  for (std::size_t i = 0; i < ch.size(); ++i) {
    const std::string p = "trunk.conv" + std::to_string(i + 1);
    add_param(p + ".w", {ch[i], in, 3, 3}, std::sqrt(6.0 / (in * 9)));
    add_param(p + ".b", {ch[i]}, 0.0);
    in = ch[i];
  }
  if (config_.cntx == CntxKind::BLSTM) {
    const int h = config_.blstm_hidden;
    for (const char* dir : {"fw", "bw"}) {
      const std::string p = std::string("blstm.") + dir;
      add_param(p + ".wx", {4 * h, in}, 1.0 / std::sqrt(h));
      add_param(p + ".wh", {4 * h, h}, 1.0 / std::sqrt(h));
      Tensor b = add_param(p + ".b", {4 * h}, 0.0);
      std::fill(b.values().begin() + h, b.values().begin() + 2 * h, 1.0);  // forget gate
    }
  }
  const int fc = frame_channels();
  switch (config_.pred) {
    case PredKind::CTC:
      add_param("ctc.w", {kClasses, fc}, 1.0 / std::sqrt(fc));
      add_param("ctc.b", {kClasses}, 0.0);
      break;
    case PredKind::ATTN: {
      const int hd = config_.attn_hidden, a = config_.attn_dim, e = config_.attn_embed;
      add_param("attn.key.w", {a, fc}, 1.0 / std::sqrt(fc));
      add_param("attn.query.w", {a, hd}, 1.0 / std::sqrt(hd));
      add_param("attn.query.b", {a}, 0.0);
      add_param("attn.score.w", {1, a}, 1.0 / std::sqrt(a));
      add_param("attn.embed", {kClasses + 1, e}, 1.0);
      add_param("attn.gru.wx", {3 * hd, e + fc}, 1.0 / std::sqrt(hd));
      add_param("attn.gru.bx", {3 * hd}, 0.0);
      add_param("attn.gru.wh", {3 * hd, hd}, 1.0 / std::sqrt(hd));
      add_param("attn.gru.bh", {3 * hd}, 0.0);
      add_param("attn.out.w", {kClasses, hd + fc}, 1.0 / std::sqrt(hd + fc));
      add_param("attn.out.b", {kClasses}, 0.0);
      break;
    }
    case PredKind::SEG:
      add_param("seg.w", {kClasses, fc, 1, 1}, 1.0 / std::sqrt(fc));
      add_param("seg.b", {kClasses}, 0.0);
      break;
  }
}

Tensor Recognizer::add_param(const std::string& name, Shape shape, double bound) {
  Rng rng = Rng::derive(config_.seed, params_.size());
  std::vector<double> v(ad::numel(shape));
  if (bound > 0) {
    for (double& x : v) x = rng.uniform(-bound, bound);
  }
  Tensor t = Tensor::from(std::move(shape), std::move(v), true);
  params_.emplace_back(name, t);
  return t;
}

Tensor Recognizer::param(const std::string& name) const {
  for (const auto& [n, t] : params_) {
    if (n == name) return t;
  }
  throw Error(ErrorCode::InvalidConfig, "model has no parameter '" + name + "'");
}

std::vector<Tensor> Recognizer::parameters() const {
  std::vector<Tensor> out;
  for (const auto& [n, t] : params_) out.push_back(t);
  return out;
}

std::size_t Recognizer::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.size();
  return n;
}

int Recognizer::frame_channels() const {
  const int c = config_.trunk_channels.back();
  switch (config_.cntx) {
    case CntxKind::NONE: return c;
    case CntxKind::BLSTM: return 2 * config_.blstm_hidden;
    case CntxKind::PPM: return c * (1 + static_cast<int>(config_.ppm_pool_sizes.size()));
  }
  return c;
}

Tensor Recognizer::feat_extract(const Tensor& images) const {
  if (images.rank() != 4 || images.dim(1) != 1 || images.dim(2) != render::kImageHeight ||
      images.dim(3) != render::kImageWidth) {
    throw Error(ErrorCode::ShapeMismatch, "feat_extract: expected [N,1,32,128] images, got " +
                                              ad::shape_str(images.shape()));
  }
  Tensor x = images;
  for (std::size_t i = 0; i < config_.trunk_channels.size(); ++i) {
    const std::string p = "trunk.conv" + std::to_string(i + 1);
    x = ad::relu(ad::conv2d(x, param(p + ".w"), param(p + ".b")));
    if (i < 2) x = ad::max_pool2d(x, 2);
  }
  return x;
}

namespace {
// [N,C,H,W] -> [N,W,C] by averaging rows.
Tensor collapse_height(const Tensor& fm) { return ad::permute(ad::mean_axis(fm, 2), {0, 2, 1}); }
}  // namespace

Tensor Recognizer::lstm_direction(const Tensor& frames, const std::string& prefix, bool reverse) const {
  const int n = frames.dim(0), t_len = frames.dim(1), c = frames.dim(2), h = config_.blstm_hidden;
  const Tensor proj = ad::reshape(ad::affine(ad::reshape(frames, {n * t_len, c}), param(prefix + ".wx"), param(prefix + ".b")),
                                  {n, t_len, 4 * h});
  const Tensor wh = param(prefix + ".wh");
  Tensor hs = Tensor::zeros({n, h}), cs = Tensor::zeros({n, h});
  std::vector<Tensor> out(t_len);
  for (int s = 0; s < t_len; ++s) {
    const int t = reverse ? t_len - 1 - s : s;
    const Tensor g = ad::add(ad::select(proj, 1, t), ad::affine(hs, wh));
    const Tensor i = ad::sigmoid(ad::slice(g, 1, 0, h));
    const Tensor f = ad::sigmoid(ad::slice(g, 1, h, 2 * h));
    const Tensor z = ad::tanh(ad::slice(g, 1, 2 * h, 3 * h));
    const Tensor o = ad::sigmoid(ad::slice(g, 1, 3 * h, 4 * h));
    cs = ad::add(ad::mul(f, cs), ad::mul(i, z));
    hs = ad::mul(o, ad::tanh(cs));
    out[t] = hs;
  }
  return ad::stack(out, 1);
}

Tensor Recognizer::bilstm(const Tensor& frames) const {
  if (frames.rank() != 3 || frames.dim(1) == 0) {
    throw Error(ErrorCode::ShapeMismatch, "bilstm: expected [N,T,C] frames, got " + ad::shape_str(frames.shape()));
  }
  return ad::concat({lstm_direction(frames, "blstm.fw", false), lstm_direction(frames, "blstm.bw", true)}, 2);
}

Tensor Recognizer::cntx_apply(const Tensor& fm) const {
  if (fm.rank() != 4) throw Error(ErrorCode::ShapeMismatch, "cntx_apply: expected a 2-D feature map");
  const bool sequence_head = config_.pred != PredKind::SEG;
  switch (config_.cntx) {
    case CntxKind::NONE:
      return sequence_head ? collapse_height(fm) : fm;
    case CntxKind::BLSTM:
      if (!sequence_head) throw Error(ErrorCode::InvalidConfig, "segmentation head cannot follow a BLSTM context");
      return bilstm(collapse_height(fm));
    case CntxKind::PPM: {
      const int h = fm.dim(2), w = fm.dim(3);
      std::vector<Tensor> parts{fm};
      for (int s : config_.ppm_pool_sizes) {
        parts.push_back(ad::bilinear_resize(ad::adaptive_avg_pool2d(fm, s, s), h, w));
      }
      const Tensor map = ad::concat(parts, 1);
      return sequence_head ? collapse_height(map) : map;
    }
  }
  return fm;
}

Tensor Recognizer::ctc_logits(const Tensor& frames) const {
  if (frames.rank() != 3) throw Error(ErrorCode::ShapeMismatch, "ctc head expects [N,T,C] frames");
  const int n = frames.dim(0), t = frames.dim(1), c = frames.dim(2);
  return ad::reshape(ad::affine(ad::reshape(frames, {n * t, c}), param("ctc.w"), param("ctc.b")), {n, t, kClasses});
}

AttnOutput Recognizer::attn_forward(const Tensor& frames, const std::vector<std::vector<int>>& labels,
                                    bool teacher_forcing) const {
  if (frames.rank() != 3 || frames.dim(1) == 0) {
    throw Error(ErrorCode::InvalidInput, "attention decoder needs a non-empty frame sequence, got " +
                                             ad::shape_str(frames.shape()));
  }
  const int n = frames.dim(0), t_len = frames.dim(1), c = frames.dim(2);
  const int hd = config_.attn_hidden, a = config_.attn_dim;
  int steps = config_.max_decode_steps;
  if (teacher_forcing) {
    if (labels.size() != static_cast<std::size_t>(n)) {
      throw Error(ErrorCode::InvalidInput, "teacher forcing needs one label per sample");
    }
    std::size_t longest = 0;
    for (const auto& l : labels) longest = std::max(longest, l.size());
    steps = static_cast<int>(longest) + 1;
  }

  const Tensor keys = ad::reshape(ad::affine(ad::reshape(frames, {n * t_len, c}), param("attn.key.w")), {n, t_len, a});
  const Tensor wq = param("attn.query.w"), bq = param("attn.query.b"), ws = param("attn.score.w");
  const Tensor embed = param("attn.embed");
  const Tensor wx = param("attn.gru.wx"), bx = param("attn.gru.bx"), wh = param("attn.gru.wh"), bh = param("attn.gru.bh");
  const Tensor wo = param("attn.out.w"), bo = param("attn.out.b");

  AttnOutput out;
  Tensor h = Tensor::zeros({n, hd});
  std::vector<int> prev(n, kGoToken);
  std::vector<char> done(n, 0);
  std::vector<Tensor> step_logits;
  for (int s = 0; s < steps; ++s) {
    const Tensor e = ad::tanh(ad::add_over_time(keys, ad::affine(h, wq, bq)));
    const Tensor scores = ad::reshape(ad::affine(ad::reshape(e, {n * t_len, a}), ws), {n, t_len});
    const Tensor alpha = ad::softmax(scores);
    out.attention.push_back(alpha.values());
    const Tensor glimpse = ad::weighted_sum(alpha, frames);
    const Tensor x = ad::concat({ad::gather_rows(embed, prev), glimpse}, 1);
    const Tensor gx = ad::affine(x, wx, bx), gh = ad::affine(h, wh, bh);
    const Tensor r = ad::sigmoid(ad::add(ad::slice(gx, 1, 0, hd), ad::slice(gh, 1, 0, hd)));
    const Tensor z = ad::sigmoid(ad::add(ad::slice(gx, 1, hd, 2 * hd), ad::slice(gh, 1, hd, 2 * hd)));
    const Tensor cand = ad::tanh(ad::add(ad::slice(gx, 1, 2 * hd, 3 * hd), ad::mul(r, ad::slice(gh, 1, 2 * hd, 3 * hd))));
    h = ad::add(cand, ad::mul(z, ad::sub(h, cand)));
    const Tensor logits = ad::affine(ad::concat({h, glimpse}, 1), wo, bo);
    step_logits.push_back(logits);

    bool all_done = true;
    for (int i = 0; i < n; ++i) {
      if (teacher_forcing) {
        prev[i] = s < static_cast<int>(labels[i].size()) ? labels[i][s] : kSpecial;
      } else {
        prev[i] = argmax(logits.values().data() + static_cast<std::size_t>(i) * kClasses, kClasses);
        if (prev[i] == kSpecial) done[i] = 1;
        all_done = all_done && done[i];
      }
    }
    if (!teacher_forcing && all_done) break;
  }
  out.logits = ad::stack(step_logits, 1);
  return out;
}

Tensor Recognizer::seg_forward(const Tensor& fm) const {
  if (fm.rank() != 4) {
    throw Error(ErrorCode::ShapeMismatch, "segmentation head expects a 2-D feature map, got " + ad::shape_str(fm.shape()));
  }
  return ad::conv2d(fm, param("seg.w"), param("seg.b"));
}

namespace {
std::vector<std::vector<int>> encode_all(const Batch& batch, PredKind kind) {
  const ClassSet& cs = ClassSet::standard();
  std::vector<std::vector<int>> out;
  out.reserve(batch.labels.size());
  for (const auto& l : batch.labels) out.push_back(render::encode_label(l, cs, kind));
  return out;
}

void check_batch(const Batch& batch) {
  const std::size_t per = static_cast<std::size_t>(render::kImageHeight) * render::kImageWidth;
  if (batch.size <= 0 || batch.labels.size() != static_cast<std::size_t>(batch.size) ||
      batch.pixels.size() != per * batch.size) {
    throw Error(ErrorCode::ShapeMismatch, "batch of " + std::to_string(batch.size) + " has inconsistent fields");
  }
}
}  // namespace

Tensor Recognizer::attn_train_logits(const Batch& batch) const {
  check_batch(batch);
  return attn_forward(encode(batch.images()), encode_all(batch, PredKind::CTC), true).logits;
}

Tensor Recognizer::attn_loss_from_logits(const Tensor& logits, const std::vector<std::vector<int>>& targets) const {
  return sequence_cross_entropy(logits, targets);
}

Tensor Recognizer::seg_loss_from_logits(const Tensor& logits, const Batch& batch) const {
  if (batch.boxes.size() != static_cast<std::size_t>(batch.size)) {
    throw Error(ErrorCode::InvalidInput, "segmentation loss needs character boxes for every sample");
  }
  std::vector<render::SegTarget> targets;
  targets.reserve(batch.size);
  for (int i = 0; i < batch.size; ++i) {
    targets.push_back(render::make_seg_target(batch.labels[i], batch.boxes[i], ClassSet::standard()));
  }
  return pixel_cross_entropy(logits, targets);
}

Tensor Recognizer::seg_char_votes(const Tensor& seg_logits, const Batch& batch, std::vector<char>* present) const {
  if (batch.boxes.size() != static_cast<std::size_t>(batch.size)) {
    throw Error(ErrorCode::InvalidInput, "segmentation votes need character boxes for every sample");
  }
  std::vector<ad::Region> regions;
  if (present) present->clear();
  for (int i = 0; i < batch.size; ++i) {
    const std::size_t chars = batch.labels[i].size();
    if (batch.boxes[i].size() != chars) {
      throw Error(ErrorCode::InvalidInput, "sample " + std::to_string(i) + ": box count differs from label length");
    }
    for (auto& cells : char_regions(batch.boxes[i])) {
      if (present) present->push_back(cells.empty() ? 0 : 1);
      regions.push_back(ad::Region{i, std::move(cells)});
    }
  }
  return ad::region_mean(seg_logits, regions);
}

Tensor Recognizer::loss(const Batch& batch) const {
  check_batch(batch);
  switch (config_.pred) {
    case PredKind::CTC:
      return ad::ctc_loss(ctc_logits(encode(batch.images())), encode_all(batch, PredKind::CTC), kSpecial);
    case PredKind::ATTN:
      return attn_loss_from_logits(attn_train_logits(batch), encode_all(batch, PredKind::ATTN));
    case PredKind::SEG:
      return seg_loss_from_logits(seg_forward(encode(batch.images())), batch);
  }
  return {};
}

std::vector<std::string> Recognizer::predict(const Batch& batch) const {
  ad::NoGradGuard guard;
  const std::size_t per = static_cast<std::size_t>(render::kImageHeight) * render::kImageWidth;
  if (batch.size <= 0 || batch.pixels.size() != per * batch.size) {
    throw Error(ErrorCode::ShapeMismatch, "predict: pixel buffer does not match batch size");
  }
  const Tensor enc = encode(batch.images());
  std::vector<std::string> out(batch.size);
  switch (config_.pred) {
    case PredKind::CTC: {
      const Tensor logits = ctc_logits(enc);
      const int t = logits.dim(1);
      for (int i = 0; i < batch.size; ++i) {
        LogitSequence seq(t, kClasses);
        std::copy_n(logits.values().begin() + static_cast<std::ptrdiff_t>(i) * t * kClasses, t * kClasses,
                    seq.scores.begin());
        out[i] = ctc_greedy_decode(seq);
      }
      break;
    }
    case PredKind::ATTN: {
      const Tensor logits = attn_forward(enc, {}, false).logits;
      const int s = logits.dim(1);
      for (int i = 0; i < batch.size; ++i) {
        LogitSequence seq(s, kClasses);
        std::copy_n(logits.values().begin() + static_cast<std::ptrdiff_t>(i) * s * kClasses, s * kClasses,
                    seq.scores.begin());
        out[i] = attn_greedy_decode(seq);
      }
      break;
    }
    case PredKind::SEG: {
      const Tensor logits = seg_forward(enc);
      const int h = logits.dim(2), w = logits.dim(3);
      const std::size_t map = static_cast<std::size_t>(kClasses) * h * w;
      for (int i = 0; i < batch.size; ++i) {
        std::vector<double> one(logits.values().begin() + static_cast<std::ptrdiff_t>(i * map),
                                logits.values().begin() + static_cast<std::ptrdiff_t>((i + 1) * map));
        out[i] = seg_decode(one, kClasses, h, w).text;
      }
      break;
    }
  }
  return out;
}

std::string Recognizer::config_path_for(const std::string& checkpoint_path) {
  return std::filesystem::path(checkpoint_path).replace_extension(".json").string();
}

void Recognizer::save(const std::string& path) const {
  ad::save_checkpoint(path, params_, config_.to_json());
  std::ofstream cfg(config_path_for(path));
  if (!cfg) throw Error(ErrorCode::Io, "cannot write model config next to " + path);
  cfg << json::parse(config_.to_json()).dump(2) << "\n";
}

Recognizer Recognizer::load(const std::string& path) {
  ad::NamedTensors probe;
  // The checkpoint header carries the config; read it first to build the parameter layout.
  const std::string meta = ad::load_checkpoint(path, probe);
  Recognizer model(ModelConfig::from_json(meta));
  ad::load_checkpoint(path, model.params_);
  return model;
}

}  // namespace vocablab::models
