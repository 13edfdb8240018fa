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

#include <boost/math/distributions/chi_squared.hpp>
#include <cctype>
#include <map>
#include <set>

#include "vocablab/corpus.hpp"
#include "vocablab/error.hpp"

using namespace vocablab;
using namespace vocablab::corpus;

namespace {

double chi2_p(const std::vector<double>& observed, const std::vector<double>& expected, int dof) {
  double stat = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    stat += (observed[i] - expected[i]) * (observed[i] - expected[i]) / expected[i];
  }
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), stat));
}

Vocabulary numbered_vocab(int n) {
  std::vector<std::string> words;
  for (int i = 0; i < n; ++i) {
    std::string w;
    for (int v = i + 26; v > 0; v /= 26) w.push_back(static_cast<char>('a' + v % 26));
    words.push_back(w);
  }
  return Vocabulary(words, "numbered");
}

}  // namespace

TEST_CASE("normalize_word folds case and strips punctuation") {
  CHECK(normalize_word("Off!") == "off");
  CHECK(normalize_word("SALAD") == "salad");
  CHECK(normalize_word("don't") == "dont");
  CHECK_THROWS_AS(normalize_word(""), Error);
  try {
    normalize_word("?!");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyAfterNormalize);
  }
}

TEST_CASE("normalize_word is idempotent over printable strings") {
  Rng rng(5);
  for (int t = 0; t < 2000; ++t) {
    std::string s;
    const int len = 1 + static_cast<int>(rng.below(10));
    for (int i = 0; i < len; ++i) s.push_back(static_cast<char>(33 + rng.below(94)));
    try {
      const auto once = normalize_word(s);
      CHECK(normalize_word(once) == once);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptyAfterNormalize);
    }
  }
}

TEST_CASE("case variants are always three") {
  auto v = expand_case_variants("salad");
  CHECK(v[0].text == "SALAD");
  CHECK(v[1].text == "salad");
  CHECK(v[2].text == "Salad");
  for (const auto& s : v) CHECK(s.normalized == "salad");
  v = expand_case_variants("a");
  CHECK(v[0].text == "A");
  CHECK(v[1].text == "a");
  CHECK(v[2].text == "A");
  v = expand_case_variants("b2");
  CHECK(v[0].text == "B2");
  CHECK(v[2].text == "B2");
}

TEST_CASE("punctuation injection follows the draw") {
  const WordSample base = expand_case_variants("salad")[1];
  CHECK(inject_punctuation(base, PunctuationDraw{0.5, 4, true}) == base);
  const auto hit = inject_punctuation(base, PunctuationDraw{0.05, 4, true});
  CHECK(hit.text == "salad!");
  CHECK(hit.normalized == "salad");
  CHECK(inject_punctuation(base, PunctuationDraw{0.05, 0, false}).text == ".salad");
}

TEST_CASE("punctuation rate is ten percent") {
  Rng rng(11);
  int hits = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) hits += draw_punctuation(rng).u < kPunctuationRate;
  CHECK(std::abs(hits / static_cast<double>(n) - 0.10) <= 0.01);
}

TEST_CASE("LS corpus: variants, membership, determinism") {
  const Vocabulary one({"a"}, "one");
  const auto three = sample_ls_corpus(one, 3, 1);
  REQUIRE(three.size() == 3);
  for (const auto& s : three) CHECK(s.normalized == "a");
  CHECK(sample_ls_corpus(one, 0, 1).empty());

  const auto vocab = default_partition().train;
  const auto a = sample_ls_corpus(vocab, 3000, 7), b = sample_ls_corpus(vocab, 3000, 7);
  CHECK(a == b);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(vocab.contains_normalized(a[i].normalized));
    CHECK(a[i].corpus_kind == CorpusKind::LS);
    if (i % 3 == 2) {
      // A base word contributes upper, lower and title variants in turn.
      CHECK(a[i - 2].normalized == a[i].normalized);
      CHECK(a[i - 1].normalized == a[i].normalized);
      CHECK(a[i - 2].case_kind == CaseKind::Upper);
      CHECK(a[i - 1].case_kind == CaseKind::Lower);
      CHECK(a[i].case_kind == CaseKind::Title);
    }
  }
}

TEST_CASE("LS word frequencies are uniform") {
  const Vocabulary vocab = numbered_vocab(100);
  REQUIRE(vocab.size() == 100);
  const auto samples = sample_ls_corpus(vocab, 90000, 3);  // 30000 base-word draws
  std::map<std::string, double> counts;
  for (std::size_t i = 0; i < samples.size(); i += 3) counts[samples[i].normalized] += 1;
  std::vector<double> obs, exp;
  for (const auto& w : vocab.words()) {
    obs.push_back(counts[w]);
    exp.push_back(300.0);
  }
  CHECK(chi2_p(obs, exp, 99) > 0.01);
}

TEST_CASE("RS corpus: category mix, lengths, letter uniformity") {
  LengthHistogram hist{{2, 50}, {4, 200}, {5, 300}, {7, 150}, {10, 20}};
  const auto samples = sample_rs_corpus(hist, 60000, 5);
  std::size_t letters = 0, digits = 0, punct = 0;
  std::map<char, double> letter_counts;
  std::map<std::size_t, double> lengths;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    CHECK(s.corpus_kind == CorpusKind::RS);
    if (i % 3 != 1) continue;  // lowercase variant of each base draw
    lengths[s.text.size()] += 1;
    for (char c : s.text) {
      if (std::isalpha(static_cast<unsigned char>(c))) {
        ++letters;
        letter_counts[c] += 1;
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        ++digits;
      } else {
        ++punct;
      }
    }
  }
  const double total = static_cast<double>(letters + digits + punct);
  REQUIRE(total >= 100000);
  CHECK(std::abs(100.0 * letters / total - 60.0) <= 1.0);
  CHECK(std::abs(100.0 * digits / total - 30.0) <= 1.0);
  CHECK(std::abs(100.0 * punct / total - 10.0) <= 1.0);

  std::vector<double> obs, exp;
  for (char c = 'a'; c <= 'z'; ++c) {
    obs.push_back(letter_counts[c]);
    exp.push_back(letters / 26.0);
  }
  CHECK(chi2_p(obs, exp, 25) > 0.01);

  obs.clear();
  exp.clear();
  const double draws = 20000.0;
  for (const auto& [len, count] : hist) {
    obs.push_back(lengths[len]);
    exp.push_back(draws * count / 720.0);
  }
  CHECK(chi2_p(obs, exp, static_cast<int>(hist.size()) - 1) > 0.01);
  CHECK_THROWS_AS(sample_rs_corpus({}, 10, 1), Error);
}

TEST_CASE("mixing respects the ratio") {
  const auto vocab = default_partition().train;
  const auto ls = sample_ls_corpus(vocab, 20000, 1);
  const auto rs = sample_rs_corpus(length_histogram(ls), 20000, 2);
  auto count_rs = [](const std::vector<WordSample>& v) {
    std::size_t n = 0;
    for (const auto& s : v) n += s.corpus_kind == CorpusKind::RS;
    return n;
  };
  CHECK(count_rs(mix_corpora(rs, ls, {0.0, 20000, 3})) == 0);
  CHECK(count_rs(mix_corpora(rs, ls, {1.0, 20000, 3})) == 20000);
  const double frac = count_rs(mix_corpora(rs, ls, {0.5, 20000, 3})) / 20000.0;
  CHECK(std::abs(frac - 0.5) <= 0.02);
  CHECK_THROWS_AS(mix_corpora(rs, ls, {1.5, 10, 3}), Error);
}

TEST_CASE("split_eval partitions by normalized membership") {
  const Vocabulary cat({"cat"}, "t");
  const auto split = split_eval(std::vector<std::string>{"Cat", "dog"}, cat, [](const std::string& s) { return s; });
  CHECK(split.in_vocab == std::vector<std::string>{"Cat"});
  CHECK(split.out_vocab == std::vector<std::string>{"dog"});
  const auto empty = split_eval(std::vector<std::string>{"Cat", "dog"}, Vocabulary{}, [](const std::string& s) { return s; });
  CHECK(empty.out_vocab.size() == 2);

  // 3000 labels of which exactly 1354 are vocabulary words.
  const auto partition = default_partition();
  const auto in_words = partition.train.sorted_words(), out_words = partition.held_out.sorted_words();
  std::vector<std::string> labels;
  for (int i = 0; i < 1354; ++i) labels.push_back(in_words[i % in_words.size()]);
  for (int i = 0; i < 1646; ++i) labels.push_back(out_words[i % out_words.size()] + "!");
  const auto s = split_eval(labels, partition.train, [](const std::string& l) { return l; });
  CHECK(s.in_vocab.size() == 1354);
  CHECK(s.out_vocab.size() == 1646);
}

TEST_CASE("split_eval is exhaustive and disjoint on random data") {
  Rng rng(4);
  const auto words = bundled_words();
  for (int t = 0; t < 20; ++t) {
    std::vector<std::string> vocab_words, labels;
    for (int i = 0; i < 50; ++i) vocab_words.push_back(words[rng.below(words.size())]);
    for (int i = 0; i < 200; ++i) labels.push_back(words[rng.below(words.size())]);
    const Vocabulary v(vocab_words, "r");
    const auto s = split_eval(labels, v, [](const std::string& l) { return l; });
    CHECK(s.in_vocab.size() + s.out_vocab.size() == labels.size());
    for (const auto& l : s.in_vocab) CHECK(v.contains(l));
    for (const auto& l : s.out_vocab) CHECK_FALSE(v.contains(l));
  }
}

TEST_CASE("bundled vocabulary and its partition") {
  const auto& words = bundled_words();
  CHECK(words.size() == 2000);
  const auto p = default_partition();
  CHECK(p.train.size() == 1500);
  CHECK(p.held_out.size() == 500);
  for (const auto& w : p.held_out.words()) CHECK_FALSE(p.train.contains_normalized(w));
  for (const auto& w : p.train.words()) {
    CHECK(w == normalize_word(w));
  }
}
