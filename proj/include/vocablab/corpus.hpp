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

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "vocablab/rng.hpp"

namespace vocablab::corpus {

enum class CorpusKind { LS, RS };
enum class CaseKind { Upper, Lower, Title };

std::string_view to_string(CorpusKind kind);
std::string_view to_string(CaseKind kind);
CorpusKind parse_corpus_kind(std::string_view s);
CaseKind parse_case_kind(std::string_view s);

// Probability that a word instance receives one punctuation mark.
inline constexpr double kPunctuationRate = 0.10;
// Letters : digits : punctuation in random pseudowords.
inline constexpr double kRsLetterShare = 0.6;
inline constexpr double kRsDigitShare = 0.3;

/// Lowercases ASCII letters and drops every punctuation character.
/// Throws InvalidInput for an empty string and EmptyAfterNormalize when
/// nothing survives the strip.
std::string normalize_word(std::string_view raw);

/// Normalized word set that decides in-vocabulary membership.
class Vocabulary {
 public:
  Vocabulary() = default;
  // Every entry is normalized; entries that normalize to nothing are skipped.
  Vocabulary(const std::vector<std::string>& words, std::string source_tag);

  static Vocabulary load(const std::filesystem::path& path, std::string source_tag = {});
  void save(const std::filesystem::path& path) const;

  // Normalizes `word` before lookup; unnormalizable input is never contained.
  bool contains(std::string_view word) const;
  bool contains_normalized(const std::string& normalized) const { return words_.count(normalized) > 0; }

  const std::set<std::string>& words() const { return words_; }
  std::vector<std::string> sorted_words() const { return {words_.begin(), words_.end()}; }
  const std::string& source_tag() const { return source_tag_; }
  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }

 private:
  std::set<std::string> words_;
  std::string source_tag_;
};

struct WordSample {
  std::string text;
  std::string normalized;
  CorpusKind corpus_kind = CorpusKind::LS;
  CaseKind case_kind = CaseKind::Lower;

  bool operator==(const WordSample&) const = default;
};

/// Upper, lower and title-case renderings, always exactly three.
std::array<WordSample, 3> expand_case_variants(std::string_view word, CorpusKind kind = CorpusKind::LS);

struct PunctuationDraw {
  double u = 1.0;          // insertion happens iff u < kPunctuationRate
  std::size_t mark = 0;    // index into kPunctuation
  bool append = true;
};

PunctuationDraw draw_punctuation(Rng& rng);
WordSample inject_punctuation(WordSample sample, const PunctuationDraw& draw);

/// LexiconSynth: each drawn vocabulary word yields its three case variants
/// (consecutive samples), each of which gets its own punctuation draw.
std::vector<WordSample> sample_ls_corpus(const Vocabulary& vocab, std::size_t n, std::uint64_t seed);

/// Word-length histogram: length -> count.
using LengthHistogram = std::map<std::size_t, std::size_t>;
LengthHistogram length_histogram(const std::vector<WordSample>& samples);

/// RandomSynth: pseudowords with lengths from `length_dist` and characters
/// drawn 6:3:1 from letters/digits/punctuation, uniform within category.
std::vector<WordSample> sample_rs_corpus(const LengthHistogram& length_dist, std::size_t n, std::uint64_t seed);

struct CorpusMixSpec {
  double ratio_r = 0.5;
  std::size_t total_count = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

/// MixedSynth: sample i is rs[i] with probability r, else ls[i]. Both inputs
/// must hold at least total_count samples.
std::vector<WordSample> mix_corpora(const std::vector<WordSample>& rs, const std::vector<WordSample>& ls,
                                    const CorpusMixSpec& spec);

template <typename Sample>
struct EvalSplit {
  std::vector<Sample> in_vocab;
  std::vector<Sample> out_vocab;
};

/// Partitions by membership of the normalized label. Labels that cannot be
/// normalized are out-of-vocabulary.
template <typename Sample, typename LabelOf>
EvalSplit<Sample> split_eval(const std::vector<Sample>& samples, const Vocabulary& vocab, LabelOf label_of) {
  EvalSplit<Sample> split;
  for (const auto& s : samples) {
    if (vocab.contains(label_of(s))) {
      split.in_vocab.push_back(s);
    } else {
      split.out_vocab.push_back(s);
    }
  }
  return split;
}

inline EvalSplit<WordSample> split_eval(const std::vector<WordSample>& samples, const Vocabulary& vocab) {
  return split_eval(samples, vocab, [](const WordSample& s) -> const std::string& { return s.text; });
}

/// The bundled list of 2000 common English words, in file order.
const std::vector<std::string>& bundled_words();

struct VocabularyPartition {
  Vocabulary train;     // 1500 words
  Vocabulary held_out;  // 500 words, never seen in training
};

/// Every fourth bundled word (index % 4 == 3) is held out.
VocabularyPartition default_partition();

std::vector<std::string> read_word_list(const std::filesystem::path& path);

}  // namespace vocablab::corpus
