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

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "vocablab/autodiff.hpp"
#include "vocablab/models.hpp"
#include "vocablab/render.hpp"
#include "vocablab/rng.hpp"

namespace vocablab::testing {

inline std::vector<double> random_values(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline ad::Tensor random_tensor(ad::Shape shape, std::uint64_t seed, bool requires_grad = true, double lo = -1.0,
                                double hi = 1.0) {
  const std::size_t n = ad::numel(shape);
  return ad::Tensor::from(std::move(shape), random_values(n, seed, lo, hi), requires_grad);
}

// Scalar probe <y, r> with a fixed random r, so every output coordinate
// contributes to the checked gradient.
inline ad::Tensor project(const ad::Tensor& y, std::uint64_t seed = 99) {
  const ad::Tensor r = ad::Tensor::from(y.shape(), random_values(y.size(), seed));
  return ad::sum(ad::mul(y, r));
}

inline double check_inputs(const std::vector<ad::Tensor>& inputs,
                           const std::function<ad::Tensor(const std::vector<ad::Tensor>&)>& f,
                           std::size_t max_coords = 0) {
  return ad::grad_check_params([&] { return project(f(inputs)); }, inputs, 1e-5, max_coords);
}

struct ModelCheck {
  double worst = 0.0;
  std::size_t checked = 0, skipped = 0;
};

// Finite-difference check over whole models. ReLU and max-pool make the loss
// piecewise smooth, and a central difference straddling a kink measures a
// blend of two slopes. Such coordinates show up as disagreement between the
// h and h/2 estimates (which agree to O(h^2) on smooth pieces); they are
// counted as skipped rather than compared. Central differences at h = 1e-5
// carry ~1e-11 of absolute rounding noise, so the relative error is floored
// at a gradient scale of 1e-6.
inline ModelCheck model_grad_check(const std::function<ad::Tensor()>& loss_fn, const std::vector<ad::Tensor>& params,
                                   std::size_t coords_per_param, std::uint64_t seed = 7, double h = 1e-5) {
  for (auto p : params) {
    if (p.has_grad()) p.zero_grad();
  }
  ad::backward(loss_fn());
  std::vector<std::vector<double>> analytic;
  for (auto p : params) analytic.push_back(p.has_grad() ? p.grad() : std::vector<double>(p.size(), 0.0));

  ad::NoGradGuard guard;
  Rng rng(seed);
  ModelCheck out;
  auto central = [&](std::vector<double>& values, std::size_t i, double step) {
    const double saved = values[i];
    values[i] = saved + step;
    const double up = loss_fn().item();
    values[i] = saved - step;
    const double down = loss_fn().item();
    values[i] = saved;
    return (up - down) / (2.0 * step);
  };
  for (std::size_t k = 0; k < params.size(); ++k) {
    ad::Tensor p = params[k];
    auto& values = p.values();
    for (std::size_t c = 0; c < std::min(coords_per_param, values.size()); ++c) {
      const std::size_t i = values.size() <= coords_per_param ? c : static_cast<std::size_t>(rng.below(values.size()));
      const double wide = central(values, i, h), narrow = central(values, i, 0.5 * h);
      if (std::abs(wide - narrow) > 1e-5 * (std::abs(wide) + std::abs(narrow)) + 1e-9) {
        ++out.skipped;
        continue;
      }
      ++out.checked;
      const double a = analytic[k][i];
      out.worst = std::max(out.worst, std::abs(a - wide) / std::max(1e-6, std::abs(a) + std::abs(wide)));
    }
  }
  return out;
}

// Renders `words` (as given, no case variants) into a batch.
inline models::Batch make_batch(const std::vector<std::string>& words, std::uint64_t seed,
                                const render::StyleParams& style = {}) {
  models::Batch b;
  b.size = static_cast<int>(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    const corpus::WordSample s{words[i], words[i], corpus::CorpusKind::LS, corpus::CaseKind::Lower};
    const auto img = render::rasterize(s, style, derive_seed(seed, i));
    b.pixels.insert(b.pixels.end(), img.pixels.begin(), img.pixels.end());
    b.labels.push_back(img.label);
    b.boxes.push_back(img.char_boxes);
  }
  return b;
}

// Exhaustive CTC oracle: sum the probability of every frame path that
// collapses to `label`.
inline double brute_force_ctc(const models::LogitSequence& f, const std::vector<int>& label, int blank) {
  std::vector<std::vector<double>> prob(f.length, std::vector<double>(f.classes));
  for (int t = 0; t < f.length; ++t) {
    double mx = *std::max_element(f.row(t), f.row(t) + f.classes), z = 0;
    for (int k = 0; k < f.classes; ++k) z += std::exp(f.at(t, k) - mx);
    for (int k = 0; k < f.classes; ++k) prob[t][k] = std::exp(f.at(t, k) - mx) / z;
  }
  double total = 0;
  std::vector<int> path(f.length, 0);
  for (;;) {
    std::vector<int> collapsed;
    int prev = -1;
    double p = 1;
    for (int t = 0; t < f.length; ++t) {
      p *= prob[t][path[t]];
      if (path[t] != blank && path[t] != prev) collapsed.push_back(path[t]);
      prev = path[t];
    }
    if (collapsed == label) total += p;
    int t = 0;
    while (t < f.length && ++path[t] == f.classes) path[t++] = 0;
    if (t == f.length) break;
  }
  return -std::log(total);
}

inline models::ModelConfig small_config(PredKind pred, models::CntxKind cntx, std::uint64_t seed = 3) {
  models::ModelConfig c;
  c.pred = pred;
  c.cntx = cntx;
  c.trunk_channels = {3, 4, 4, 5};
  c.blstm_hidden = 4;
  c.attn_hidden = 6;
  c.attn_embed = 3;
  c.attn_dim = 5;
  c.seed = seed;
  return c;
}

using Combo = std::pair<PredKind, models::CntxKind>;

// Every valid PRED x CNTX pairing (segmentation has no BLSTM variant).
inline const std::vector<Combo> kCombos = {
    {PredKind::CTC, models::CntxKind::NONE},  {PredKind::CTC, models::CntxKind::BLSTM},
    {PredKind::CTC, models::CntxKind::PPM},   {PredKind::ATTN, models::CntxKind::NONE},
    {PredKind::ATTN, models::CntxKind::BLSTM}, {PredKind::ATTN, models::CntxKind::PPM},
    {PredKind::SEG, models::CntxKind::NONE},  {PredKind::SEG, models::CntxKind::PPM}};

}  // namespace vocablab::testing
