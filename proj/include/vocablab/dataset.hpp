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

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "vocablab/corpus.hpp"
#include "vocablab/models.hpp"
#include "vocablab/render.hpp"

namespace vocablab::harness {

// Training corpora plus the two test-set kinds: LS-protocol renders of
// training-vocabulary words (InVoc) and of held-out words (OutVoc).
enum class DataKind { LS, RS, MS, InVoc, OutVoc };
std::string_view to_string(DataKind kind);
DataKind parse_data_kind(std::string_view s);

struct SynthSpec {
  DataKind kind = DataKind::LS;
  double ratio = 0.5;  // MS only: share of RS samples
  std::size_t count = 1000;
  std::uint64_t seed = 1;
  render::StyleParams style;
  corpus::VocabularyPartition vocab = corpus::default_partition();
  std::string subset;  // test-subset name; defaults to the kind name

  void validate() const;
};

struct Record {
  std::string id;
  std::string file;        // image path relative to the dataset directory
  std::string label;       // rendered text, case and punctuation intact
  std::string normalized;  // evaluation key
  corpus::CorpusKind corpus = corpus::CorpusKind::LS;
  corpus::CaseKind case_kind = corpus::CaseKind::Lower;
  std::vector<render::Box> boxes;
  std::vector<std::uint8_t> pixels;  // 32 x 128, 8-bit
};

struct DatasetMeta {
  DataKind kind = DataKind::LS;
  double ratio = 0.0;
  std::size_t count = 0;
  std::uint64_t seed = 0;
  std::string subset;
  bool in_vocab = false;  // counts toward Omega when used as a test subset
  std::string heldout_role;  // "in", "out" or empty
  render::StyleParams style;
};

class Dataset {
 public:
  DatasetMeta meta;
  std::vector<Record> records;
  corpus::Vocabulary vocabulary;  // training vocabulary, for in-vocabulary rates

  std::size_t size() const { return records.size(); }
  models::Batch batch(const std::vector<std::size_t>& indices) const;
  std::vector<std::string> labels() const;

  void save(const std::filesystem::path& dir) const;
  static Dataset load(const std::filesystem::path& dir);
};

/// Deterministic in (spec): same spec, same bytes.
Dataset synthesize(const SynthSpec& spec);

}  // namespace vocablab::harness
