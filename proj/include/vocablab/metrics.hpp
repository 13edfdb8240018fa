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

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vocablab/corpus.hpp"

namespace vocablab::metrics {

/// Case-folded, punctuation-free comparison key. Unlike normalize_word it
/// never throws: an empty or all-punctuation string maps to "".
std::string comparison_key(std::string_view s);
bool words_match(std::string_view pred, std::string_view gt);

/// Percent of exact matches after normalization. ShapeMismatch on length
/// mismatch, InvalidInput on empty lists.
double accuracy(const std::vector<std::string>& predictions, const std::vector<std::string>& ground_truths);
/// Fraction of predictions whose normalized form is in `vocab`.
double in_vocab_rate(const std::vector<std::string>& predictions, const corpus::Vocabulary& vocab);

double gap(double acc_in, double acc_out);
double normalized_gap(double gap_points, double acc_all);
double vocab_generalization(double gap_ls, double gap_rs);
double harmonic_mean(double oa, double va, double vg);

enum class TrainSet { RS, MS, LS };
inline constexpr TrainSet kTrainSets[] = {TrainSet::RS, TrainSet::MS, TrainSet::LS};
std::string_view to_string(TrainSet t);
TrainSet parse_train_set(std::string_view s);

struct Subset {
  std::string name;
  std::size_t count = 0;
  bool in_vocab = false;  // member of Omega
};

/// Accuracy of each training set on each test subset, plus subset sizes and
/// the held-out InVoc/OutVoc pair used for gaps.
class RunMatrix {
 public:
  void add_subset(const std::string& name, std::size_t count, bool in_vocab);
  void set_heldout_pair(const std::string& in_subset, const std::string& out_subset);
  void set_accuracy(TrainSet train, const std::string& subset, double percent);
  void set_in_vocab_rate(TrainSet train, double rate);

  const std::vector<Subset>& subsets() const { return subsets_; }
  const Subset& subset(const std::string& name) const;
  std::optional<double> accuracy(TrainSet train, const std::string& subset) const;
  /// Like accuracy() but throws MissingCell naming the cell.
  double require(TrainSet train, const std::string& subset) const;
  bool has_train_set(TrainSet train) const;
  const std::string& heldout_in() const { return heldout_in_; }
  const std::string& heldout_out() const { return heldout_out_; }
  std::optional<double> in_vocab_rate(TrainSet train) const;

  /// Count-weighted accuracy of `train` over the named subsets.
  double weighted(TrainSet train, const std::vector<std::string>& names) const;

  /// Table layout: one column per subset, rows for counts, Omega membership,
  /// the held-out pair, then one accuracy row per training set.
  std::string to_csv() const;
  static RunMatrix from_csv(const std::string& text);

 private:
  std::vector<Subset> subsets_;
  std::string heldout_in_, heldout_out_;
  std::map<std::pair<TrainSet, std::string>, double> acc_;
  std::map<TrainSet, double> in_vocab_rate_;
};

struct MetricsReport {
  std::string pred, cntx;
  std::map<TrainSet, double> ga, gap, ngap, in_vocab_rate;  // only train sets present
  double oa = 0, va = 0, vg = 0, hm = 0;

  std::string to_json() const;
  static MetricsReport from_json(const std::string& text);
};

/// Needs RS over every subset, LS over every subset, and the held-out pair;
/// MS is optional. Throws MissingCell naming the first absent cell.
MetricsReport assemble_report(const RunMatrix& matrix, const std::string& pred = "", const std::string& cntx = "");

/// Summary row (OA, VA, VG, HM) appended to a matrix CSV.
std::string report_csv(const RunMatrix& matrix, const MetricsReport& report);

}  // namespace vocablab::metrics
