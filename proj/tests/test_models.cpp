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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <queue>
#include <tuple>

#include "grad_suite.hpp"
#include "test_util.hpp"
#include "vocablab/error.hpp"
#include "vocablab/models.hpp"

using namespace vocablab;
using namespace vocablab::models;
using vocablab::testing::brute_force_ctc;
using vocablab::testing::kCombos;
using vocablab::testing::make_batch;
using vocablab::testing::small_config;

namespace {

const ClassSet& cs() { return ClassSet::standard(); }
int idx(char c) { return *cs().index_of(c); }
constexpr int K = ClassSet::kNumClasses;

LogitSequence frames_from_argmax(const std::string& pattern) {
  // '-' is blank; other characters are their class.
  LogitSequence f(static_cast<int>(pattern.size()), K);
  for (int t = 0; t < f.length; ++t) {
    const int k = pattern[t] == '-' ? cs().blank_index() : idx(pattern[t]);
    f.at(t, k) = 5.0;
  }
  return f;
}

std::vector<double> blob_map(const std::vector<std::tuple<char, int, int, int, int>>& blobs, int h = 8, int w = 32) {
  // blobs: (char, x0, x1 inclusive, y0, y1 inclusive)
  std::vector<double> m(static_cast<std::size_t>(K * h * w), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m[static_cast<std::size_t>(cs().background_index() * h * w + y * w + x)] = 3.0;
  for (const auto& [c, x0, x1, y0, y1] : blobs) {
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        m[static_cast<std::size_t>(cs().background_index() * h * w + y * w + x)] = 0.0;
        m[static_cast<std::size_t>(idx(c) * h * w + y * w + x)] = 4.0;
      }
    }
  }
  return m;
}

}  // namespace

TEST_CASE("CTC loss on hand-countable cases") {
  // Three classes {a, b, blank}, uniform logits.
  const int blank = 2;
  LogitSequence one(1, 3);
  CHECK(ctc_loss(one, {0}, blank) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  LogitSequence two(2, 3);
  CHECK(ctc_loss(two, {0}, blank) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  try {
    ctc_loss(two, {0, 0}, blank);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::LabelTooLong);
  }
}

TEST_CASE("CTC dynamic programme matches exhaustive path enumeration") {
  Rng rng(31);
  int checked = 0;
  double worst = 0;
  for (int trial = 0; trial < 700; ++trial) {
    const int classes = 2 + static_cast<int>(rng.below(3));  // 1..3 characters plus blank
    const int blank = classes - 1;
    const int t_len = 1 + static_cast<int>(rng.below(6));
    const int l_len = static_cast<int>(rng.below(4));
    std::vector<int> label;
    for (int i = 0; i < l_len; ++i) label.push_back(static_cast<int>(rng.below(classes - 1)));
    LogitSequence f(t_len, classes);
    for (double& v : f.scores) v = rng.uniform(-3, 3);
    if (ad::ctc_min_frames(label) > t_len) {
      CHECK_THROWS_AS(ctc_loss(f, label, blank), Error);
      continue;
    }
    const double dp = ctc_loss(f, label, blank), oracle = brute_force_ctc(f, label, blank);
    worst = std::max(worst, std::abs(dp - oracle) / std::abs(oracle));
    ++checked;
  }
  CHECK(checked >= 500);
  CHECK(worst <= 1e-6);
}

TEST_CASE("CTC greedy decoding") {
  CHECK(ctc_greedy_decode(frames_from_argmax("aa-ab")) == "aab");
  CHECK(ctc_greedy_decode(frames_from_argmax("----")) == "");
  CHECK(ctc_greedy_decode(frames_from_argmax("a-a")) == "aa");

  Rng rng(17);
  const std::string alphabet = "ab-";
  for (int t = 0; t < 500; ++t) {
    std::string p;
    const int len = 1 + static_cast<int>(rng.below(10));
    for (int i = 0; i < len; ++i) p.push_back(alphabet[rng.below(3)]);
    // A blank next to a blank, or between two different symbols, adds nothing.
    // Between two equal characters it would split a repeat, so skip those.
    const std::size_t at = rng.below(p.size() + 1);
    if (at > 0 && at < p.size() && p[at - 1] == p[at] && p[at] != '-') continue;
    std::string q = p;
    q.insert(q.begin() + static_cast<std::ptrdiff_t>(at), '-');
    CHECK(ctc_greedy_decode(frames_from_argmax(p)) == ctc_greedy_decode(frames_from_argmax(q)));
  }
}

TEST_CASE("attention loss and decoding on plain sequences") {
  LogitSequence uniform(3, K);
  CHECK(attn_loss(uniform, {idx('a'), idx('b'), cs().eos_index()}) == doctest::Approx(std::log(K)));
  LogitSequence sharp(2, K);
  sharp.at(0, idx('z')) = 60;
  sharp.at(1, cs().eos_index()) = 60;
  CHECK(attn_loss(sharp, {idx('z'), cs().eos_index()}) < 1e-20);
  CHECK(attn_greedy_decode(sharp) == "z");

  Rng rng(5);
  LogitSequence r(4, K);
  for (double& v : r.scores) v = rng.uniform(-2, 2);
  const std::vector<int> target{idx('c'), idx('a'), idx('t'), cs().eos_index()};
  double direct = 0;
  for (int s = 0; s < 4; ++s) {
    double z = 0;
    for (int k = 0; k < K; ++k) z += std::exp(r.at(s, k));
    direct += std::log(z) - r.at(s, target[s]);
  }
  CHECK(attn_loss(r, target) == doctest::Approx(direct / 4));
}

TEST_CASE("segmentation decoding") {
  CHECK(seg_decode(blob_map({}), K, 8, 32).text.empty());
  const auto ab = seg_decode(blob_map({{'a', 0, 4, 2, 5}, {'b', 10, 14, 1, 6}}), K, 8, 32);
  CHECK(ab.text == "ab");
  REQUIRE(ab.regions.size() == 2);
  CHECK(ab.regions[0].min_x == 0);
  // Placement order of the blobs cannot matter.
  CHECK(seg_decode(blob_map({{'b', 10, 14, 1, 6}, {'a', 0, 4, 2, 5}}), K, 8, 32).text == "ab");
  // Same min-x: the higher blob comes first.
  CHECK(seg_decode(blob_map({{'x', 3, 5, 5, 7}, {'y', 3, 5, 0, 2}}), K, 8, 32).text == "yx");
  // Single-pixel components are dropped.
  CHECK(seg_decode(blob_map({{'q', 7, 7, 3, 3}, {'r', 12, 13, 3, 3}}), K, 8, 32).text == "r");
}

TEST_CASE("segmentation targets decode back to their label") {
  const std::vector<std::string> words = {"cab", "hum", "Zoo", "max", "Bow", "dog", "NEW", "sky", "42", "ape"};
  for (std::size_t i = 0; i < words.size(); ++i) {
    const corpus::WordSample s{words[i], words[i], corpus::CorpusKind::LS, corpus::CaseKind::Lower};
    const auto img = render::rasterize(s, render::StyleParams{}, 100 + i);
    const auto target = render::make_seg_target(img, cs());
    std::vector<double> logits(static_cast<std::size_t>(K * 8 * 32), 0.0);
    for (int p = 0; p < 8 * 32; ++p) logits[static_cast<std::size_t>(target.classes[p] * 256 + p)] = 1.0;
    std::string folded = words[i];
    for (auto& c : folded) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    CHECK(seg_decode(logits, K, 8, 32).text == folded);
  }
}

TEST_CASE("segmentation voting") {
  const int h = 8, w = 32;
  std::vector<double> constant(static_cast<std::size_t>(K * h * w));
  for (int k = 0; k < K; ++k) std::fill_n(constant.begin() + k * h * w, h * w, 0.1 * k);
  const auto v = seg_vote(constant, K, h, w, {{{0, 0}, {3, 4}}, {{7, 31}}, {}});
  REQUIRE(v.length == 3);
  for (int k = 0; k < K; ++k) {
    CHECK(v.at(0, k) == doctest::Approx(0.1 * k));
    CHECK(v.at(1, k) == doctest::Approx(0.1 * k));
  }
  CHECK(v.present[0]);
  CHECK_FALSE(v.present[2]);

  Rng rng(4);
  std::vector<double> random(static_cast<std::size_t>(K * h * w));
  for (double& x : random) x = rng.uniform(-1, 1);
  std::vector<std::pair<int, int>> region;
  for (int t = 0; t < 9; ++t) region.emplace_back(rng.below(h), rng.below(w));
  const auto r = seg_vote(random, K, h, w, {region, {{2, 5}}});
  for (int k = 0; k < K; ++k) {
    double m = 0;
    for (auto [y, x] : region) m += random[static_cast<std::size_t>(k * h * w + y * w + x)];
    CHECK(r.at(0, k) == doctest::Approx(m / 9));
    CHECK(r.at(1, k) == random[static_cast<std::size_t>(k * h * w + 2 * w + 5)]);
  }
}

TEST_CASE("configuration rules") {
  ModelConfig bad;
  bad.pred = PredKind::SEG;
  bad.cntx = CntxKind::BLSTM;
  try {
    Recognizer r(bad);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidConfig);
  }
  ModelConfig c;
  c.pred = PredKind::CTC;
  c.cntx = CntxKind::PPM;
  c.seed = 77;
  const auto back = ModelConfig::from_json(c.to_json());
  CHECK(back.pred == c.pred);
  CHECK(back.cntx == c.cntx);
  CHECK(back.seed == 77);
  CHECK(back.ppm_pool_sizes == std::vector<int>{1, 3, 4, 6});
  CHECK(parse_cntx_kind("blstm") == CntxKind::BLSTM);
  CHECK(parse_pred_kind(to_string(PredKind::SEG)) == PredKind::SEG);
}

TEST_CASE("trunk and context shapes") {
  ModelConfig c;
  c.pred = PredKind::SEG;
  c.cntx = CntxKind::PPM;
  const Recognizer seg(c);
  const auto zero = ad::Tensor::zeros({2, 1, 32, 128});
  const auto fm = seg.feat_extract(zero);
  CHECK(fm.shape() == ad::Shape{2, 64, 8, 32});
  for (double x : fm.values()) CHECK(std::isfinite(x));
  CHECK(seg.cntx_apply(fm).shape() == ad::Shape{2, 320, 8, 32});
  CHECK(seg.seg_forward(seg.cntx_apply(fm)).shape() == ad::Shape{2, K, 8, 32});
  CHECK_THROWS_AS(seg.feat_extract(ad::Tensor::zeros({1, 1, 32, 64})), Error);
  CHECK_THROWS_AS(seg.seg_forward(ad::Tensor::zeros({1, 32, 64})), Error);

  c.pred = PredKind::CTC;
  c.cntx = CntxKind::NONE;
  const Recognizer ctc(c);
  // Constant map -> every frame identical.
  const auto constant = ad::Tensor::from({1, 64, 8, 32}, std::vector<double>(64 * 8 * 32, 0.25));
  const auto frames = ctc.cntx_apply(constant);
  CHECK(frames.shape() == ad::Shape{1, 32, 64});
  for (double x : frames.values()) CHECK(x == doctest::Approx(0.25));
  c.cntx = CntxKind::BLSTM;
  CHECK(Recognizer(c).cntx_apply(fm).shape() == ad::Shape{2, 32, 128});
}

TEST_CASE("BLSTM reversal symmetry") {
  ModelConfig c;
  c.pred = PredKind::CTC;
  c.cntx = CntxKind::BLSTM;
  c.blstm_hidden = 5;
  Recognizer a(c), b(c);
  // b's forward direction is a's backward direction and vice versa.
  auto find = [](ad::NamedTensors& p, const std::string& n) -> ad::Tensor& {
    for (auto& [name, t] : p)
      if (name == n) return t;
    throw std::runtime_error(n);
  };
  for (const char* part : {".wx", ".wh", ".b"}) {
    find(b.named_parameters(), std::string("blstm.fw") + part).values() =
        find(a.named_parameters(), std::string("blstm.bw") + part).values();
    find(b.named_parameters(), std::string("blstm.bw") + part).values() =
        find(a.named_parameters(), std::string("blstm.fw") + part).values();
  }
  const int n = 2, t = 7, ch = 64, h = 5;
  const auto x = vocablab::testing::random_tensor({n, t, ch}, 8, false);
  std::vector<double> rev(x.size());
  for (int i = 0; i < n; ++i)
    for (int s = 0; s < t; ++s)
      std::copy_n(x.values().begin() + (i * t + s) * ch, ch, rev.begin() + (i * t + (t - 1 - s)) * ch);
  const auto out = a.bilstm(x).values();
  const auto out_rev = b.bilstm(ad::Tensor::from({n, t, ch}, rev)).values();
  double worst = 0;
  for (int i = 0; i < n; ++i) {
    for (int s = 0; s < t; ++s) {
      for (int j = 0; j < 2 * h; ++j) {
        const int swapped = j < h ? j + h : j - h;
        const double lhs = out_rev[static_cast<std::size_t>((i * t + s) * 2 * h + j)];
        const double rhs = out[static_cast<std::size_t>((i * t + (t - 1 - s)) * 2 * h + swapped)];
        worst = std::max(worst, std::abs(lhs - rhs));
      }
    }
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("attention forward contract") {
  const Recognizer m(small_config(PredKind::ATTN, CntxKind::NONE));
  const auto batch = make_batch({"cat", "tiger"}, 1);
  const auto enc = m.encode(batch.images());
  const auto out = m.attn_forward(enc, {{idx('c'), idx('a'), idx('t')}, {idx('t'), idx('i'), idx('g'), idx('e'), idx('r')}},
                                  true);
  CHECK(out.logits.shape() == ad::Shape{2, 6, K});
  const auto single = m.attn_forward(ad::slice(enc, 0, 0, 1), {{idx('c'), idx('a'), idx('t')}}, true);
  CHECK(single.logits.dim(1) == 4);
  for (const auto& step : out.attention) {
    for (int i = 0; i < 2; ++i) {
      const int t = enc.dim(1);
      const double s = std::accumulate(step.begin() + i * t, step.begin() + (i + 1) * t, 0.0);
      CHECK(std::abs(s - 1.0) < 1e-9);
    }
  }
  const auto free = m.attn_forward(enc, {}, false);
  CHECK(free.logits.dim(1) <= m.config().max_decode_steps);
  CHECK_THROWS_AS(m.attn_forward(ad::Tensor::zeros({1, 0, enc.dim(2)}), {}, false), Error);
}

TEST_CASE("losses vanish on exact targets") {
  const Recognizer m(small_config(PredKind::SEG, CntxKind::NONE));
  const auto batch = make_batch({"ox"}, 2);
  const auto target = render::make_seg_target(batch.labels[0], batch.boxes[0], cs());
  std::vector<double> onehot(static_cast<std::size_t>(K * 256), 0.0);
  for (int p = 0; p < 256; ++p) onehot[static_cast<std::size_t>(target.classes[p] * 256 + p)] = 60.0;
  CHECK(pixel_cross_entropy(ad::Tensor::from({1, K, 8, 32}, onehot), {target}).item() < 1e-20);
  CHECK(pixel_cross_entropy(ad::Tensor::zeros({1, K, 8, 32}), {target}).item() == doctest::Approx(std::log(K)));
}

TEST_CASE("gradient checks through every module combination") {
  const auto results = vocablab::testing::model_gradient_suite();
  CHECK(results.size() == kCombos.size() + 2);
  for (const auto& r : results) {
    CAPTURE(r.name);
    CHECK(r.error <= 1e-4);
    CHECK(r.skipped * 10 <= r.checked);
  }
}

TEST_CASE("checkpoint round trip keeps predictions") {
  auto cfg = small_config(PredKind::ATTN, CntxKind::BLSTM, 9);
  const Recognizer m(cfg);
  const auto dir = std::filesystem::temp_directory_path() / "vocablab_models_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "m.ckpt").string();
  m.save(path);
  const auto back = Recognizer::load(path);
  const auto batch = make_batch({"abc", "xyz"}, 3);
  CHECK(back.predict(batch) == m.predict(batch));
  CHECK(back.config().cntx == CntxKind::BLSTM);
  CHECK(back.parameter_count() == m.parameter_count());
  std::filesystem::remove_all(dir);
}
