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

#include "vocablab/mutual.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <optional>

#include <nlohmann/json.hpp>

#include "vocablab/error.hpp"
#include "vocablab/render.hpp"

namespace vocablab::mutual {

using ad::Tensor;
using models::Batch;
using models::LogitSequence;

std::vector<double> shared_softmax(const double* logits) {
  std::vector<double> p(logits, logits + kSharedClasses);
  const double mx = *std::max_element(p.begin(), p.end());
  double s = 0.0;
  for (double& v : p) s += (v = std::exp(v - mx));
  for (double& v : p) v /= s;
  return p;
}

AlignedDistributions align_logits(const LogitSequence& attn_logits, const LogitSequence& seg_voted,
                                  std::size_t label_length) {
  if (label_length == 0) throw Error(ErrorCode::InvalidInput, "alignment needs a non-empty label");
  const int n = static_cast<int>(label_length);
  if (attn_logits.length < n || seg_voted.length < n || attn_logits.classes < kSharedClasses ||
      seg_voted.classes < kSharedClasses) {
    throw Error(ErrorCode::InvalidInput, "logit sequences shorter than the label");
  }
  AlignedDistributions d;
  d.positions = n;
  d.valid.assign(n, 1);
  for (int i = 0; i < n; ++i) {
    const auto a = shared_softmax(attn_logits.row(i));
    const auto b = shared_softmax(seg_voted.row(i));
    d.p1.insert(d.p1.end(), a.begin(), a.end());
    d.p2.insert(d.p2.end(), b.begin(), b.end());
    if (static_cast<std::size_t>(i) < seg_voted.present.size() && !seg_voted.present[i]) d.valid[i] = 0;
  }
  return d;
}

double kl_term(const double* q, const double* p, int k) {
  double total = 0.0;
  for (int j = 0; j < k; ++j) {
    if (q[j] > 0.0) total += q[j] * std::log(q[j] / std::max(p[j], ad::kKlFloor));
  }
  return total;
}

double kl_term(const std::vector<double>& q, const std::vector<double>& p) {
  if (q.size() != p.size() || q.empty()) throw Error(ErrorCode::ShapeMismatch, "KL needs two distributions of equal size");
  return kl_term(q.data(), p.data(), static_cast<int>(q.size()));
}

namespace {

models::ModelConfig pair_config(PredKind pred, std::uint64_t seed) {
  models::ModelConfig c;
  c.pred = pred;
  c.cntx = models::CntxKind::NONE;
  c.seed = seed;
  return c;
}

}  // namespace

MutualPair::MutualPair(std::uint64_t seed1, std::uint64_t seed2, double w, const ad::AdamConfig& a)
    : MutualPair(models::Recognizer(pair_config(PredKind::ATTN, seed1)),
                 models::Recognizer(pair_config(PredKind::SEG, seed2)), w, a) {}

MutualPair::MutualPair(models::Recognizer attn, models::Recognizer seg, double w, const ad::AdamConfig& a)
    : theta1(std::move(attn)), theta2(std::move(seg)), adam(a), kl_weight(w) {
  if (theta1.config().pred != PredKind::ATTN || theta2.config().pred != PredKind::SEG) {
    throw Error(ErrorCode::InvalidConfig, "mutual learning pairs an attention model with a segmentation model");
  }
  if (!(kl_weight >= 0.0)) throw Error(ErrorCode::InvalidConfig, "kl_weight must be non-negative");
}

namespace {

struct Forward {
  MutualLosses losses;
  std::vector<double> q1;  // attention distributions at unmasked-or-not positions, P x 42
};

// One joint forward. Each model records a graph only when asked, so a
// half-step never builds (or could leak gradient into) the peer's graph.
Forward forward_pair(const MutualPair& pair, const Batch& batch, bool grad1, bool grad2) {
  if (batch.boxes.size() != static_cast<std::size_t>(batch.size)) {
    throw Error(ErrorCode::InvalidInput, "mutual learning needs character boxes for every sample");
  }
  const ClassSet& cs = ClassSet::standard();
  std::vector<std::vector<int>> attn_targets;
  for (const auto& l : batch.labels) attn_targets.push_back(render::encode_label(l, cs, PredKind::ATTN));

  Tensor a_logits, s_logits, votes;
  std::vector<char> present;
  {
    std::optional<ad::NoGradGuard> off;
    if (!grad1) off.emplace();
    a_logits = pair.theta1.attn_train_logits(batch);
  }
  {
    std::optional<ad::NoGradGuard> off;
    if (!grad2) off.emplace();
    s_logits = pair.theta2.seg_forward(pair.theta2.encode(batch.images()));
    votes = pair.theta2.seg_char_votes(s_logits, batch, &present);
  }

  const int n = batch.size, steps = a_logits.dim(1), k = ClassSet::kNumClasses;
  std::vector<int> rows;
  for (int i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < batch.labels[i].size(); ++j) rows.push_back(i * steps + static_cast<int>(j));
  }
  const int p = static_cast<int>(rows.size());
  std::vector<double> weight(p);
  int valid = 0;
  for (int r = 0; r < p; ++r) {
    weight[r] = present[r] ? 1.0 / n : 0.0;
    valid += present[r];
  }

  Forward f;
  f.q1.resize(static_cast<std::size_t>(p) * kSharedClasses);
  std::vector<double> q2(f.q1.size());
  for (int r = 0; r < p; ++r) {
    const auto a = shared_softmax(a_logits.values().data() + static_cast<std::size_t>(rows[r]) * k);
    const auto b = shared_softmax(votes.values().data() + static_cast<std::size_t>(r) * k);
    std::copy(a.begin(), a.end(), f.q1.begin() + static_cast<std::ptrdiff_t>(r) * kSharedClasses);
    std::copy(b.begin(), b.end(), q2.begin() + static_cast<std::ptrdiff_t>(r) * kSharedClasses);
  }

  auto& out = f.losses;
  out.positions = valid;
  const Tensor task1 = pair.theta1.attn_loss_from_logits(a_logits, attn_targets);
  const Tensor task2 = pair.theta2.seg_loss_from_logits(s_logits, batch);
  out.task1 = task1.item();
  out.task2 = task2.item();
  if (p == 0) {
    out.l1 = task1;
    out.l2 = task2;
    return f;
  }
  const Tensor p1_rows = ad::slice(ad::gather_rows(ad::reshape(a_logits, {n * steps, k}), rows), 1, 0, kSharedClasses);
  const Tensor p2_rows = ad::slice(votes, 1, 0, kSharedClasses);
  const Tensor kl1 = ad::kl_to_target(p1_rows, q2, weight);     // KL(p2 || p1), p2 constant
  const Tensor kl2 = ad::kl_to_target(p2_rows, f.q1, weight);   // KL(p1 || p2), p1 constant
  out.kl1 = kl1.item();
  out.kl2 = kl2.item();
  assert(out.kl1 >= -1e-12 && out.kl2 >= -1e-12);
  out.l1 = ad::add(task1, ad::scale(kl1, pair.kl_weight));
  out.l2 = ad::add(task2, ad::scale(kl2, pair.kl_weight));
  return f;
}

}  // namespace

MutualLosses mutual_losses(const MutualPair& pair, const Batch& batch) {
  return forward_pair(pair, batch, true, true).losses;
}

StepRecord mutual_step(MutualPair& pair, const Batch& batch) {
  StepRecord rec;
  rec.step = pair.state1.step + 1;

  const Forward first = forward_pair(pair, batch, true, false);
  rec.l1 = first.losses.l1.item();
  rec.attn_loss = first.losses.task1;
  rec.kl1 = first.losses.kl1;
  ad::backward(first.losses.l1);
  auto params1 = pair.theta1.parameters();
  ad::adam_step(params1, pair.state1, pair.adam);

  const Forward second = forward_pair(pair, batch, false, true);
  rec.l2 = second.losses.l2.item();
  rec.seg_loss = second.losses.task2;
  rec.kl2 = second.losses.kl2;
  ad::backward(second.losses.l2);
  auto params2 = pair.theta2.parameters();
  ad::adam_step(params2, pair.state2, pair.adam);

  for (std::size_t i = 0; i < first.q1.size(); ++i) {
    rec.p1_shift = std::max(rec.p1_shift, std::abs(first.q1[i] - second.q1[i]));
  }
  const int valid = std::max(1, first.losses.positions);
  rec.mean_kl = 0.5 * (rec.kl1 + rec.kl2) * batch.size / valid;
  return rec;
}

std::string StepRecord::to_json() const {
  nlohmann::json j{{"step", step},         {"L1", l1},   {"L2", l2},   {"attn_loss", attn_loss},
                   {"seg_loss", seg_loss}, {"kl1", kl1}, {"kl2", kl2}, {"mean_kl", mean_kl}};
  return j.dump();
}

}  // namespace vocablab::mutual
