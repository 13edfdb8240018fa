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

#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "vocablab/error.hpp"
#include "vocablab/mutual.hpp"

using namespace vocablab;
using namespace vocablab::mutual;
using vocablab::testing::make_batch;

namespace {

constexpr int K = ClassSet::kNumClasses;

models::ModelConfig tiny(PredKind pred, std::uint64_t seed) {
  models::ModelConfig c;
  c.pred = pred;
  c.cntx = models::CntxKind::NONE;
  c.trunk_channels = {3, 4, 4, 5};
  c.attn_hidden = 6;
  c.attn_embed = 3;
  c.attn_dim = 5;
  c.seed = seed;
  return c;
}

MutualPair tiny_pair(double kl_weight = 1.0) {
  return MutualPair(models::Recognizer(tiny(PredKind::ATTN, 1)), models::Recognizer(tiny(PredKind::SEG, 2)), kl_weight);
}

std::vector<std::vector<double>> snapshot(const models::Recognizer& m) {
  std::vector<std::vector<double>> out;
  for (const auto& [name, t] : m.named_parameters()) out.push_back(t.values());
  return out;
}

}  // namespace

TEST_CASE("KL term values") {
  const double expected = 0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(0.5 / 0.1);
  CHECK(kl_term({0.5, 0.5}, {0.9, 0.1}) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(std::abs(kl_term({0.5, 0.5}, {0.9, 0.1}) - 0.5108) <= 1e-4);
  CHECK(kl_term({0.2, 0.3, 0.5}, {0.2, 0.3, 0.5}) == 0.0);
  CHECK(kl_term({1.0, 0.0}, {0.0, 1.0}) == doctest::Approx(std::log(1e12)));
  CHECK_THROWS_AS(kl_term({0.5, 0.5}, {1.0}), Error);

  Rng rng(13);
  for (int t = 0; t < 1000; ++t) {
    const int k = 2 + static_cast<int>(rng.below(41));
    std::vector<double> q(k), p(k);
    double sq = 0, sp = 0;
    for (int i = 0; i < k; ++i) {
      sq += q[i] = rng.uniform();
      sp += p[i] = rng.uniform();
    }
    for (int i = 0; i < k; ++i) {
      q[i] /= sq;
      p[i] /= sp;
    }
    CHECK(kl_term(q, p) >= 0.0);
  }
}

TEST_CASE("alignment over the shared classes") {
  Rng rng(3);
  models::LogitSequence a(4, K), s(3, K);
  for (double& v : a.scores) v = rng.uniform(-3, 3);
  for (double& v : s.scores) v = rng.uniform(-3, 3);
  s.present = {1, 0, 1};
  const auto d = align_logits(a, s, 3);
  CHECK(d.positions == 3);
  CHECK(d.valid == std::vector<char>{1, 0, 1});
  for (int i = 0; i < 3; ++i) {
    // Oracle: full softmax over all K classes, then renormalize over the 42 shared ones.
    double z = 0;
    for (int k = 0; k < K; ++k) z += std::exp(a.at(i, k));
    double shared = 0;
    for (int k = 0; k < kSharedClasses; ++k) shared += std::exp(a.at(i, k)) / z;
    double sum1 = 0, sum2 = 0;
    for (int k = 0; k < kSharedClasses; ++k) {
      CHECK(d.row1(i)[k] == doctest::Approx(std::exp(a.at(i, k)) / z / shared).epsilon(1e-12));
      sum1 += d.row1(i)[k];
      sum2 += d.row2(i)[k];
    }
    CHECK(std::abs(sum1 - 1) < 1e-9);
    CHECK(std::abs(sum2 - 1) < 1e-9);
  }

  const auto same = align_logits(a, a, 4);
  CHECK(same.p1 == same.p2);
  CHECK_THROWS_AS(align_logits(a, s, 0), Error);
  CHECK_THROWS_AS(align_logits(a, s, 4), Error);
}

TEST_CASE("zero KL weight leaves the task losses") {
  const auto pair = tiny_pair(0.0);
  const auto batch = make_batch({"cat", "ox"}, 4);
  const auto l = mutual_losses(pair, batch);
  CHECK(l.l1.item() == doctest::Approx(pair.theta1.loss(batch).item()).epsilon(1e-14));
  CHECK(l.l2.item() == doctest::Approx(pair.theta2.loss(batch).item()).epsilon(1e-14));
  CHECK(l.kl1 >= 0.0);
  CHECK(l.kl2 >= 0.0);
  CHECK(l.positions == 5);
}

TEST_CASE("L1 reaches only the attention model") {
  const auto pair = tiny_pair();
  const auto batch = make_batch({"dog", "a1"}, 6);
  const auto l = mutual_losses(pair, batch);
  ad::backward(l.l1);
  for (const auto& t : pair.theta2.parameters()) {
    if (!t.has_grad()) continue;
    for (double g : const_cast<ad::Tensor&>(t).grad()) CHECK(g == 0.0);
  }
  bool any = false;
  for (auto t : pair.theta1.parameters()) {
    for (double g : t.grad()) any |= g != 0.0;
  }
  CHECK(any);
}

TEST_CASE("gradient check of L1 with respect to the attention model") {
  const auto pair = tiny_pair();
  const auto batch = make_batch({"ab", "cd"}, 8);
  using vocablab::testing::model_grad_check;
  const auto r1 = model_grad_check([&] { return mutual_losses(pair, batch).l1; }, pair.theta1.parameters(), 12);
  CHECK(r1.worst <= 1e-4);
  CHECK(r1.skipped * 10 <= r1.checked);
  const auto r2 = model_grad_check([&] { return mutual_losses(pair, batch).l2; }, pair.theta2.parameters(), 12);
  CHECK(r2.worst <= 1e-4);
  CHECK(r2.skipped * 10 <= r2.checked);
}

TEST_CASE("a mutual step updates the attention model before the second forward") {
  auto pair = tiny_pair();
  const auto batch = make_batch({"sun", "moon"}, 2);
  const auto before2 = snapshot(pair.theta2);
  const auto rec = mutual_step(pair, batch);
  CHECK(rec.p1_shift > 0.0);
  CHECK(snapshot(pair.theta2) != before2);
  CHECK(std::isfinite(rec.l1));
  CHECK(std::isfinite(rec.l2));
}

TEST_CASE("with zero KL weight the attention trajectory matches independent training") {
  auto pair = tiny_pair(0.0);
  models::Recognizer solo(tiny(PredKind::ATTN, 1));
  ad::AdamState state;
  const auto batch = make_batch({"tree", "leaf", "Root"}, 11);
  for (int step = 0; step < 5; ++step) {
    mutual_step(pair, batch);
    ad::backward(solo.loss(batch));
    auto params = solo.parameters();
    ad::adam_step(params, state, pair.adam);
  }
  CHECK(snapshot(pair.theta1) == snapshot(solo));
}

TEST_CASE("losses stay finite over 100 steps") {
  auto pair = tiny_pair();
  const auto batch = make_batch({"fig", "kiwi", "Lime!", "yam"}, 5);
  bool finite = true;
  for (int step = 0; step < 100; ++step) {
    const auto rec = mutual_step(pair, batch);
    finite &= std::isfinite(rec.l1) && std::isfinite(rec.l2) && rec.kl1 >= 0 && rec.kl2 >= 0;
  }
  CHECK(finite);
}

TEST_CASE("pairs must be attention plus segmentation") {
  CHECK_THROWS_AS(MutualPair(models::Recognizer(tiny(PredKind::SEG, 1)), models::Recognizer(tiny(PredKind::SEG, 2))),
                  Error);
  CHECK_THROWS_AS(MutualPair(models::Recognizer(tiny(PredKind::ATTN, 1)), models::Recognizer(tiny(PredKind::SEG, 2)), -1),
                  Error);
}
