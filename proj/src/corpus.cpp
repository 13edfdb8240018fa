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

#include "vocablab/corpus.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "vocablab/classes.hpp"
#include "vocablab/error.hpp"

namespace vocablab::corpus {

extern const char* const kBundledWordList;

namespace {

// Sub-stream tags so that word choice, punctuation and mixing never share draws.
constexpr std::uint64_t kStreamWord = 0x11;
constexpr std::uint64_t kStreamPunct = 0x22;
constexpr std::uint64_t kStreamMix = 0x33;

constexpr std::string_view kLetters = "abcdefghijklmnopqrstuvwxyz";
constexpr std::string_view kDigits = "0123456789";

std::string to_upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string to_title(std::string_view s) {
  std::string out(s);
  if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

}  // namespace

std::string_view to_string(CorpusKind kind) { return kind == CorpusKind::LS ? "LS" : "RS"; }

std::string_view to_string(CaseKind kind) {
  switch (kind) {
    case CaseKind::Upper: return "upper";
    case CaseKind::Lower: return "lower";
    case CaseKind::Title: return "title";
  }
  return "lower";
}

CorpusKind parse_corpus_kind(std::string_view s) {
  if (s == "LS" || s == "ls") return CorpusKind::LS;
  if (s == "RS" || s == "rs") return CorpusKind::RS;
  throw Error(ErrorCode::Format, "unknown corpus kind '" + std::string(s) + "'");
}

CaseKind parse_case_kind(std::string_view s) {
  if (s == "upper") return CaseKind::Upper;
  if (s == "lower") return CaseKind::Lower;
  if (s == "title") return CaseKind::Title;
  throw Error(ErrorCode::Format, "unknown case kind '" + std::string(s) + "'");
}

std::string normalize_word(std::string_view raw) {
  if (raw.empty()) throw Error(ErrorCode::InvalidInput, "normalize_word: empty input");
  std::string out;
  out.reserve(raw.size());
  for (char c : raw) {
    const auto u = static_cast<unsigned char>(c);
    if (std::ispunct(u)) continue;
    out.push_back(static_cast<char>(std::tolower(u)));
  }
  if (out.empty()) {
    throw Error(ErrorCode::EmptyAfterNormalize, "normalize_word: '" + std::string(raw) + "' has no non-punctuation characters");
  }
  return out;
}

Vocabulary::Vocabulary(const std::vector<std::string>& words, std::string source_tag)
    : source_tag_(std::move(source_tag)) {
  for (const auto& w : words) {
    if (w.empty()) continue;
    try {
      words_.insert(normalize_word(w));
    } catch (const Error&) {
      // all-punctuation entries carry no word
    }
  }
}

std::vector<std::string> read_word_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open word list " + path.string());
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    std::size_t start = 0;
    while (start < line.size() && std::isspace(static_cast<unsigned char>(line[start]))) ++start;
    if (start < line.size()) words.push_back(line.substr(start));
  }
  return words;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path, std::string source_tag) {
  if (source_tag.empty()) source_tag = path.filename().string();
  return Vocabulary(read_word_list(path), std::move(source_tag));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write vocabulary " + path.string());
  for (const auto& w : words_) out << w << '\n';
}

bool Vocabulary::contains(std::string_view word) const {
  if (word.empty()) return false;
  try {
    return words_.count(normalize_word(word)) > 0;
  } catch (const Error&) {
    return false;
  }
}

std::array<WordSample, 3> expand_case_variants(std::string_view word, CorpusKind kind) {
  const std::string normalized = normalize_word(word);
  std::string lower(word);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return {WordSample{to_upper(lower), normalized, kind, CaseKind::Upper},
          WordSample{lower, normalized, kind, CaseKind::Lower},
          WordSample{to_title(lower), normalized, kind, CaseKind::Title}};
}

PunctuationDraw draw_punctuation(Rng& rng) {
  PunctuationDraw d;
  d.u = rng.uniform();
  d.mark = static_cast<std::size_t>(rng.below(kPunctuation.size()));
  d.append = rng.below(2) == 1;
  return d;
}

WordSample inject_punctuation(WordSample sample, const PunctuationDraw& draw) {
  if (draw.u >= kPunctuationRate) return sample;
  const char mark = kPunctuation[draw.mark % kPunctuation.size()];
  if (draw.append) {
    sample.text.push_back(mark);
  } else {
    sample.text.insert(sample.text.begin(), mark);
  }
  return sample;
}

std::vector<WordSample> sample_ls_corpus(const Vocabulary& vocab, std::size_t n, std::uint64_t seed) {
  if (vocab.empty()) throw Error(ErrorCode::InvalidInput, "sample_ls_corpus: empty vocabulary");
  const auto words = vocab.sorted_words();
  const std::uint64_t word_seed = derive_seed(seed, kStreamWord);
  const std::uint64_t punct_seed = derive_seed(seed, kStreamPunct);
  std::vector<WordSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t base = i / 3;
    Rng word_rng = Rng::derive(word_seed, base);
    const auto& word = words[static_cast<std::size_t>(word_rng.below(words.size()))];
    const auto variants = expand_case_variants(word, CorpusKind::LS);
    Rng punct_rng = Rng::derive(punct_seed, i);
    out.push_back(inject_punctuation(variants[i % 3], draw_punctuation(punct_rng)));
  }
  return out;
}

LengthHistogram length_histogram(const std::vector<WordSample>& samples) {
  LengthHistogram hist;
  for (const auto& s : samples) ++hist[s.normalized.size()];
  return hist;
}

std::vector<WordSample> sample_rs_corpus(const LengthHistogram& length_dist, std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> lengths;
  std::vector<std::size_t> cumulative;
  std::size_t total = 0;
  for (const auto& [len, count] : length_dist) {
    if (len == 0 || count == 0) continue;
    total += count;
    lengths.push_back(len);
    cumulative.push_back(total);
  }
  if (total == 0) throw Error(ErrorCode::InvalidInput, "sample_rs_corpus: empty length distribution");

  const std::uint64_t word_seed = derive_seed(seed, kStreamWord);
  std::vector<WordSample> out;
  out.reserve(n);
  std::string pseudo;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t base = i / 3;
    Rng rng = Rng::derive(word_seed, base);
    const std::size_t pick = static_cast<std::size_t>(rng.below(total));
    std::size_t k = 0;
    while (cumulative[k] <= pick) ++k;
    const std::size_t len = lengths[k];
    // An all-punctuation draw has no normalized form; redraw it.
    for (;;) {
      pseudo.clear();
      bool has_word_char = false;
      for (std::size_t c = 0; c < len; ++c) {
        const double u = rng.uniform();
        if (u < kRsLetterShare) {
          pseudo.push_back(kLetters[rng.below(kLetters.size())]);
          has_word_char = true;
        } else if (u < kRsLetterShare + kRsDigitShare) {
          pseudo.push_back(kDigits[rng.below(kDigits.size())]);
          has_word_char = true;
        } else {
          pseudo.push_back(kPunctuation[rng.below(kPunctuation.size())]);
        }
      }
      if (has_word_char) break;
    }
    out.push_back(expand_case_variants(pseudo, CorpusKind::RS)[i % 3]);
  }
  return out;
}

void CorpusMixSpec::validate() const {
  if (!(ratio_r >= 0.0 && ratio_r <= 1.0)) {
    throw Error(ErrorCode::InvalidInput, "mix ratio must lie in [0,1], got " + std::to_string(ratio_r));
  }
  if (total_count == 0) throw Error(ErrorCode::InvalidInput, "mix total_count must be positive");
}

std::vector<WordSample> mix_corpora(const std::vector<WordSample>& rs, const std::vector<WordSample>& ls,
                                    const CorpusMixSpec& spec) {
  spec.validate();
  if (rs.size() < spec.total_count || ls.size() < spec.total_count) {
    throw Error(ErrorCode::InvalidInput, "mix_corpora: source streams shorter than total_count");
  }
  const std::uint64_t mix_seed = derive_seed(spec.seed, kStreamMix);
  std::vector<WordSample> out;
  out.reserve(spec.total_count);
  for (std::size_t i = 0; i < spec.total_count; ++i) {
    Rng rng = Rng::derive(mix_seed, i);
    out.push_back(rng.uniform() < spec.ratio_r ? rs[i] : ls[i]);
  }
  return out;
}

const std::vector<std::string>& bundled_words() {
  static const std::vector<std::string> words = [] {
    std::vector<std::string> list;
    std::istringstream in(kBundledWordList);
    std::string w;
    while (in >> w) list.push_back(w);
    return list;
  }();
  return words;
}

VocabularyPartition default_partition() {
  const auto& words = bundled_words();
  std::vector<std::string> train;
  std::vector<std::string> held;
  for (std::size_t i = 0; i < words.size(); ++i) {
    (i % 4 == 3 ? held : train).push_back(words[i]);
  }
  return {Vocabulary(train, "bundled-train"), Vocabulary(held, "bundled-held-out")};
}

}  // namespace vocablab::corpus
