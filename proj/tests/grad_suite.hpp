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

// Finite-difference gradient suite shared by the autodiff unit test and the
// acceptance runner: every primitive, every head's loss through all module
// combinations, and both mutual-learning losses.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "test_util.hpp"
#include "vocablab/autodiff.hpp"
#include "vocablab/mutual.hpp"

namespace vocablab::testing {

struct GradResult {
  std::string name;
  double error = 0;
  std::size_t skipped = 0, checked = 0;  // kink handling, whole-model checks only
};

inline std::vector<GradResult> primitive_gradient_suite() {
  using ad::Tensor;
  std::vector<GradResult> out;
  auto add = [&](std::string name, double err) { out.push_back({std::move(name), err}); };

  const Tensor x = random_tensor({4, 5}, 1), w = random_tensor({3, 5}, 2), b = random_tensor({3}, 3);
  add("affine", check_inputs({x, w, b}, [](auto& v) { return ad::affine(v[0], v[1], v[2]); }));
  add("affine/nobias", check_inputs({x, w}, [](auto& v) { return ad::affine(v[0], v[1]); }));
  // Keep relu inputs away from the kink.
  Tensor r = random_tensor({4, 5}, 4, true, 0.1, 1.0);
  for (std::size_t i = 0; i < r.size(); i += 2) r.values()[i] = -r.values()[i];
  add("relu", check_inputs({r}, [](auto& v) { return ad::relu(v[0]); }));
  add("tanh", check_inputs({x}, [](auto& v) { return ad::tanh(v[0]); }));
  add("sigmoid", check_inputs({x}, [](auto& v) { return ad::sigmoid(v[0]); }));
  add("softmax", check_inputs({x}, [](auto& v) { return ad::softmax(v[0]); }));
  add("log_softmax", check_inputs({x}, [](auto& v) { return ad::log_softmax(v[0]); }));
  const Tensor y = random_tensor({4, 5}, 5);
  add("add", check_inputs({x, y}, [](auto& v) { return ad::add(v[0], v[1]); }));
  add("sub", check_inputs({x, y}, [](auto& v) { return ad::sub(v[0], v[1]); }));
  add("mul", check_inputs({x, y}, [](auto& v) { return ad::mul(v[0], v[1]); }));
  add("scale", check_inputs({x}, [](auto& v) { return ad::scale(v[0], -2.5); }));
  add("mul/self", check_inputs({x}, [](auto& v) { return ad::mul(v[0], v[0]); }));

  const Tensor t3 = random_tensor({2, 3, 4}, 1);
  add("sum", check_inputs({t3}, [](auto& v) { return ad::sum(v[0]); }));
  add("mean", check_inputs({t3}, [](auto& v) { return ad::mean(v[0]); }));
  for (int axis = 0; axis < 3; ++axis) {
    const std::string tag = "/axis" + std::to_string(axis);
    add("mean_axis" + tag, check_inputs({t3}, [axis](auto& v) { return ad::mean_axis(v[0], axis); }));
    add("select" + tag, check_inputs({t3}, [axis](auto& v) { return ad::select(v[0], axis, 1); }));
    add("slice" + tag, check_inputs({t3}, [axis](auto& v) { return ad::slice(v[0], axis, 1, 2); }));
  }
  const Tensor u3 = random_tensor({2, 2, 4}, 2), z3 = random_tensor({2, 3, 4}, 3);
  add("concat", check_inputs({t3, u3}, [](auto& v) { return ad::concat({v[0], v[1]}, 1); }));
  add("stack", check_inputs({t3, z3}, [](auto& v) { return ad::stack({v[0], v[1]}, 1); }));
  add("reshape", check_inputs({t3}, [](auto& v) { return ad::reshape(v[0], {6, 4}); }));
  add("permute", check_inputs({t3}, [](auto& v) { return ad::permute(v[0], {2, 0, 1}); }));
  const Tensor table = random_tensor({5, 3}, 4);
  add("gather_rows", check_inputs({table}, [](auto& v) { return ad::gather_rows(v[0], {4, 0, 4, 2}); }));

  const Tensor seq = random_tensor({2, 5, 3}, 1), q = random_tensor({2, 3}, 2);
  add("add_over_time", check_inputs({seq, q}, [](auto& v) { return ad::add_over_time(v[0], v[1]); }));
  const Tensor alpha = random_tensor({2, 5}, 3), vals = random_tensor({2, 5, 4}, 4);
  add("weighted_sum", check_inputs({alpha, vals}, [](auto& v) { return ad::weighted_sum(v[0], v[1]); }));

  const Tensor img = random_tensor({2, 3, 6, 8}, 1);
  for (int k : {1, 3}) {
    const Tensor cw = random_tensor({4, 3, k, k}, 2), cb = random_tensor({4}, 3);
    add("conv2d/k" + std::to_string(k),
        check_inputs({img, cw, cb}, [](auto& v) { return ad::conv2d(v[0], v[1], v[2]); }));
  }
  // Distinct values keep the pooling argmax away from ties.
  Tensor p = random_tensor({2, 3, 6, 8}, 4);
  for (std::size_t i = 0; i < p.size(); ++i) p.values()[i] = std::sin(1.7 * static_cast<double>(i)) * 3.0;
  add("max_pool2d", check_inputs({p}, [](auto& v) { return ad::max_pool2d(v[0], 2); }));
  for (int s : {1, 3, 4, 5}) {
    add("adaptive_avg_pool2d/" + std::to_string(s),
        check_inputs({img}, [s](auto& v) { return ad::adaptive_avg_pool2d(v[0], s, s); }));
  }
  add("bilinear_resize/up", check_inputs({img}, [](auto& v) { return ad::bilinear_resize(v[0], 8, 32); }));
  add("bilinear_resize/down", check_inputs({img}, [](auto& v) { return ad::bilinear_resize(v[0], 3, 5); }));
  const std::vector<ad::Region> regions{{0, {{0, 0}, {1, 2}, {5, 7}}}, {1, {{2, 2}}}, {1, {}}};
  add("region_mean", check_inputs({img}, [&](auto& v) { return ad::region_mean(v[0], regions); }));

  const Tensor logits = random_tensor({4, 5}, 1, true, -2.0, 2.0);
  add("nll", ad::grad_check_params(
                 [&] { return ad::nll(ad::log_softmax(logits), {1, -1, 4, 0}, {0.5, 1.0, 0.25, 1.0}); }, {logits}));
  std::vector<double> target(20);
  for (int row = 0; row < 4; ++row) {
    double s = 0.0;
    for (int k = 0; k < 5; ++k) s += (target[row * 5 + k] = 0.1 + (row * 5 + k) % 3);
    for (int k = 0; k < 5; ++k) target[row * 5 + k] /= s;
  }
  target[3] = 0.0;  // zero target mass must stay finite
  add("kl_to_target",
      ad::grad_check_params([&] { return ad::kl_to_target(logits, target, {1.0, 0.5, 0.0, 2.0}); }, {logits}));
  const Tensor frames = random_tensor({2, 6, 4}, 2, true, -2.0, 2.0);
  add("ctc_loss", ad::grad_check_params([&] { return ad::ctc_loss(frames, {{0, 1, 1}, {2}}, 3); }, {frames}));
  return out;
}

// Whole-model checks use the kink-aware helper; see model_grad_check.
inline std::vector<GradResult> model_gradient_suite(std::size_t coords_per_param = 12) {
  std::vector<GradResult> out;
  const auto batch = make_batch({"ab", "c3d"}, 5);
  for (const auto& [pred, cntx] : kCombos) {
    const models::Recognizer m(small_config(pred, cntx));
    const auto r = model_grad_check([&] { return m.loss(batch); }, m.parameters(), coords_per_param);
    out.push_back({std::string(models::to_string(pred)) + "/" + std::string(models::to_string(cntx)), r.worst,
                   r.skipped, r.checked});
  }
  mutual::MutualPair pair(models::Recognizer(small_config(PredKind::ATTN, models::CntxKind::NONE, 1)),
                          models::Recognizer(small_config(PredKind::SEG, models::CntxKind::NONE, 2)));
  const auto mb = make_batch({"ab", "cd"}, 3);
  const auto l1 = model_grad_check([&] { return mutual::mutual_losses(pair, mb).l1; }, pair.theta1.parameters(),
                                   coords_per_param);
  out.push_back({"mutual/L1", l1.worst, l1.skipped, l1.checked});
  const auto l2 = model_grad_check([&] { return mutual::mutual_losses(pair, mb).l2; }, pair.theta2.parameters(),
                                   coords_per_param);
  out.push_back({"mutual/L2", l2.worst, l2.skipped, l2.checked});
  return out;
}

}  // namespace vocablab::testing
