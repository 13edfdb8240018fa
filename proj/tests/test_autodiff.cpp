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
#include <filesystem>

#include "grad_suite.hpp"
#include "test_util.hpp"
#include "vocablab/autodiff.hpp"
#include "vocablab/error.hpp"

using namespace vocablab;
using ad::Tensor;
using testing::random_tensor;

namespace {
constexpr double kTol = 1e-4;

// Direct loops over the definition, used as the conv oracle.
std::vector<double> naive_conv(const Tensor& x, const Tensor& w, const Tensor& b) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3), o = w.dim(0), k = w.dim(2), pad = k / 2;
  std::vector<double> out(static_cast<std::size_t>(n) * o * h * wd, 0.0);
  for (int i = 0; i < n; ++i)
    for (int f = 0; f < o; ++f)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < wd; ++xx) {
          double s = b.values()[f];
          for (int ch = 0; ch < c; ++ch)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = y + ky - pad, ix = xx + kx - pad;
                if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                s += w.values()[((f * c + ch) * k + ky) * k + kx] * x.values()[((i * c + ch) * h + iy) * wd + ix];
              }
          out[((i * o + f) * h + y) * wd + xx] = s;
        }
  return out;
}
}  // namespace

TEST_CASE("backward walks the graph once in reverse topological order") {
  Tensor a = Tensor::from({1}, {2.0}, true);
  Tensor b = ad::mul(a, a);       // a^2
  Tensor c = ad::add(b, a);       // a^2 + a
  Tensor d = ad::mul(c, b);       // (a^2 + a) a^2
  ad::backward(d);
  // d' = 4a^3 + 3a^2 = 32 + 12
  CHECK(a.grad()[0] == doctest::Approx(44.0));
  const auto g = ad::Graph::trace(d);
  CHECK(g.size() == 4);
}

TEST_CASE("backward rejects non-scalar losses") {
  Tensor a = random_tensor({3}, 1);
  CHECK_THROWS_AS(ad::backward(ad::relu(a)), Error);
}

TEST_CASE("no-grad mode records no parents") {
  Tensor a = random_tensor({3}, 1);
  ad::NoGradGuard guard;
  Tensor b = ad::tanh(a);
  CHECK_FALSE(b.requires_grad());
  CHECK(b.node()->inputs.empty());
}

TEST_CASE("conv2d matches the direct definition") {
  for (int k : {1, 3, 5}) {
    Tensor x = random_tensor({2, 3, 5, 7}, 1), w = random_tensor({4, 3, k, k}, 2), b = random_tensor({4}, 3);
    const Tensor y = ad::conv2d(x, w, b);
    const auto ref = naive_conv(x, w, b);
    REQUIRE(y.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(y.values()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }
}

TEST_CASE("every primitive passes a finite-difference check") {
  const auto results = vocablab::testing::primitive_gradient_suite();
  CHECK(results.size() > 40);
  for (const auto& r : results) {
    CAPTURE(r.name);
    CHECK(r.error < kTol);
  }
}

TEST_CASE("kl_to_target is a scalar and zero at agreement") {
  const Tensor logits = Tensor::from({1, 2}, {std::log(0.9), std::log(0.1)}, true);
  const Tensor kl = ad::kl_to_target(logits, {0.5, 0.5}, {1.0});
  CHECK(kl.shape() == ad::Shape{1});
  CHECK(kl.item() == doctest::Approx(0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(0.5 / 0.1)).epsilon(1e-12));
  const Tensor same = ad::kl_to_target(logits, {0.9, 0.1}, {1.0});
  CHECK(std::abs(same.item()) < 1e-12);
}

TEST_CASE("shape errors are reported") {
  const Tensor a = random_tensor({2, 3}, 1), b = random_tensor({3, 2}, 2);
  CHECK_THROWS_AS(ad::add(a, b), Error);
  CHECK_THROWS_AS(ad::affine(a, b), Error);
  CHECK_THROWS_AS(ad::reshape(a, {5}), Error);
  CHECK_THROWS_AS(ad::conv2d(random_tensor({1, 2, 4, 4}, 3), random_tensor({1, 2, 2, 2}, 4)), Error);
}

TEST_CASE("adam moves parameters against the gradient") {
  Tensor p = Tensor::from({2}, {1.0, -1.0}, true);
  std::vector<Tensor> params{p};
  ad::AdamState state;
  ad::backward(ad::sum(ad::mul(p, p)));
  ad::adam_step(params, state, ad::AdamConfig{});
  // First Adam step moves each coordinate by lr against the gradient sign.
  CHECK(p.values()[0] == doctest::Approx(1.0 - 1e-3));
  CHECK(p.values()[1] == doctest::Approx(-1.0 + 1e-3));
  CHECK(p.grad() == std::vector<double>{0.0, 0.0});
}

TEST_CASE("adam clips the global gradient norm") {
  Tensor p = Tensor::from({2}, {0.0, 0.0}, true);
  std::vector<Tensor> params{p};
  ad::AdamState state;
  ad::AdamConfig cfg;
  cfg.clip_norm = 1.0;
  cfg.lr = 1.0;
  ad::backward(ad::sum(ad::mul(Tensor::from({2}, {300.0, 400.0}), p)));
  ad::adam_step(params, state, cfg);
  // After clipping to unit norm the first Adam step is still a unit sign step.
  CHECK(p.values()[0] == doctest::Approx(-1.0));
  CHECK(state.step == 1);
}

TEST_CASE("checkpoints round-trip parameters and metadata") {
  const auto path = std::filesystem::temp_directory_path() / "vocablab_ckpt_test.ckpt";
  ad::NamedTensors params{{"a", random_tensor({2, 3}, 1)}, {"b", random_tensor({4}, 2)}};
  ad::save_checkpoint(path.string(), params, R"({"k":1})");
  ad::NamedTensors loaded{{"a", Tensor::zeros({2, 3})}, {"b", Tensor::zeros({4})}};
  const std::string meta = ad::load_checkpoint(path.string(), loaded);
  CHECK(meta.find("\"k\"") != std::string::npos);
  CHECK(loaded[0].second.values() == params[0].second.values());
  CHECK(loaded[1].second.values() == params[1].second.values());
  ad::NamedTensors wrong{{"a", Tensor::zeros({3, 2})}};
  CHECK_THROWS_AS(ad::load_checkpoint(path.string(), wrong), Error);
  std::filesystem::remove(path);
}
