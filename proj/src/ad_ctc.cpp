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

#include <algorithm>
#include <cmath>
#include <limits>

#include "ad_internal.hpp"
#include "vocablab/autodiff.hpp"
#include "vocablab/error.hpp"

namespace vocablab::ad {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace

int ctc_min_frames(const std::vector<int>& label) {
  int frames = static_cast<int>(label.size());
  for (std::size_t i = 1; i < label.size(); ++i) {
    if (label[i] == label[i - 1]) ++frames;
  }
  return frames;
}

CtcResult ctc_forward_backward(const double* logits, int frames, int classes, const std::vector<int>& label, int blank,
                               bool want_grad) {
  if (frames < 1 || classes < 2) throw Error(ErrorCode::InvalidInput, "ctc: need at least one frame and two classes");
  for (int c : label) {
    if (c < 0 || c >= classes || c == blank) {
      throw Error(ErrorCode::InvalidInput, "ctc: label index " + std::to_string(c) + " is blank or out of range");
    }
  }
  if (ctc_min_frames(label) > frames) {
    throw Error(ErrorCode::LabelTooLong, "ctc: label of length " + std::to_string(label.size()) + " needs " +
                                             std::to_string(ctc_min_frames(label)) + " frames, have " +
                                             std::to_string(frames));
  }
  const int L = static_cast<int>(label.size());
  const int S = 2 * L + 1;
  const auto T = static_cast<std::size_t>(frames);
  const auto K = static_cast<std::size_t>(classes);
  std::vector<int> ext(static_cast<std::size_t>(S));
  for (int s = 0; s < S; ++s) ext[static_cast<std::size_t>(s)] = (s % 2 == 0) ? blank : label[static_cast<std::size_t>(s / 2)];

  std::vector<double> logy(T * K);
  for (std::size_t t = 0; t < T; ++t) {
    const double* z = logits + t * K;
    const double mx = *std::max_element(z, z + K);
    double sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) sum += std::exp(z[k] - mx);
    const double lz = mx + std::log(sum);
    for (std::size_t k = 0; k < K; ++k) logy[t * K + k] = z[k] - lz;
  }
  auto ly = [&](std::size_t t, int s) { return logy[t * K + static_cast<std::size_t>(ext[static_cast<std::size_t>(s)])]; };
  auto can_skip = [&](int s) { return s >= 2 && ext[static_cast<std::size_t>(s)] != blank &&
                                      ext[static_cast<std::size_t>(s)] != ext[static_cast<std::size_t>(s - 2)]; };

  const auto US = static_cast<std::size_t>(S);
  std::vector<double> alpha(T * US, kNegInf);
  alpha[0] = ly(0, 0);
  if (S > 1) alpha[1] = ly(0, 1);
  for (std::size_t t = 1; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      double a = alpha[(t - 1) * US + static_cast<std::size_t>(s)];
      if (s >= 1) a = log_add(a, alpha[(t - 1) * US + static_cast<std::size_t>(s - 1)]);
      if (can_skip(s)) a = log_add(a, alpha[(t - 1) * US + static_cast<std::size_t>(s - 2)]);
      alpha[t * US + static_cast<std::size_t>(s)] = a == kNegInf ? kNegInf : a + ly(t, s);
    }
  }
  double log_p = alpha[(T - 1) * US + US - 1];
  if (S > 1) log_p = log_add(log_p, alpha[(T - 1) * US + US - 2]);

  CtcResult result;
  result.nll = -log_p;
  if (!want_grad) return result;

  std::vector<double> beta(T * US, kNegInf);
  beta[(T - 1) * US + US - 1] = ly(T - 1, S - 1);
  if (S > 1) beta[(T - 1) * US + US - 2] = ly(T - 1, S - 2);
  for (std::size_t t = T - 1; t-- > 0;) {
    for (int s = 0; s < S; ++s) {
      double b = beta[(t + 1) * US + static_cast<std::size_t>(s)];
      if (s + 1 < S) b = log_add(b, beta[(t + 1) * US + static_cast<std::size_t>(s + 1)]);
      if (s + 2 < S && can_skip(s + 2)) b = log_add(b, beta[(t + 1) * US + static_cast<std::size_t>(s + 2)]);
      beta[t * US + static_cast<std::size_t>(s)] = b == kNegInf ? kNegInf : b + ly(t, s);
    }
  }

  // d nll / d z_tk = y_tk - sum over states emitting k of their posterior occupancy.
  result.grad.assign(T * K, 0.0);
  std::vector<double> occ(K);
  for (std::size_t t = 0; t < T; ++t) {
    std::fill(occ.begin(), occ.end(), kNegInf);
    for (int s = 0; s < S; ++s) {
      const double ab = alpha[t * US + static_cast<std::size_t>(s)] + beta[t * US + static_cast<std::size_t>(s)];
      if (ab == kNegInf) continue;
      auto& o = occ[static_cast<std::size_t>(ext[static_cast<std::size_t>(s)])];
      o = log_add(o, ab - ly(t, s));
    }
    for (std::size_t k = 0; k < K; ++k) {
      const double post = occ[k] == kNegInf ? 0.0 : std::exp(occ[k] - log_p);
      result.grad[t * K + k] = std::exp(logy[t * K + k]) - post;
    }
  }
  return result;
}

Tensor ctc_loss(const Tensor& logits, const std::vector<std::vector<int>>& labels, int blank) {
  if (logits.rank() != 3 || labels.size() != static_cast<std::size_t>(logits.dim(0))) {
    throw Error(ErrorCode::ShapeMismatch, "ctc_loss: logits " + shape_str(logits.shape()) + " vs " +
                                              std::to_string(labels.size()) + " labels");
  }
  const int n = logits.dim(0), t = logits.dim(1), k = logits.dim(2);
  const std::size_t per = static_cast<std::size_t>(t) * k;
  const bool want_grad = grad_enabled() && logits.requires_grad();
  std::vector<double> grad(want_grad ? logits.size() : 0);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    auto r = ctc_forward_backward(logits.values().data() + static_cast<std::size_t>(i) * per, t, k,
                                  labels[static_cast<std::size_t>(i)], blank, want_grad);
    total += r.nll;
    if (want_grad) std::copy(r.grad.begin(), r.grad.end(), grad.begin() + static_cast<std::ptrdiff_t>(i * per));
  }
  const double inv = 1.0 / n;
  return detail::make_op("ctc_loss", {1}, {total * inv}, {logits}, [grad = std::move(grad), inv](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.ensure_grad();
    const double s = self.grad[0] * inv;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * grad[i];
  });
}

}  // namespace vocablab::ad
