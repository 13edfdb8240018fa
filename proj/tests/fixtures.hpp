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

// Published accuracy and metric tables used as fixtures by the metric tests
// and the acceptance runner.
#pragma once

#include <array>
#include <string>
#include <vector>

#include "vocablab/metrics.hpp"

namespace fixtures {

struct SubsetCount {
  const char* name;
  std::size_t count;
  bool in_vocab;
};

// IC13, IC15, SVT, SVTP, CUTE and the two halves of IIIT.
inline const std::array<SubsetCount, 7> kSubsets = {{{"IC13", 1015, true},
                                                     {"IC15", 1811, true},
                                                     {"SVT", 647, true},
                                                     {"SVTP", 645, true},
                                                     {"CUTE", 288, true},
                                                     {"IIIT-I", 1354, true},
                                                     {"IIIT-O", 1646, false}}};

struct ModelRows {
  const char* name;
  const char* pred;
  const char* cntx;
  std::array<double, 7> rs, ms, ls;  // subset order as kSubsets
};

struct MetricRow {
  double va, vg, oa, hm;
};

inline const ModelRows kAttnNone{"1", "attn", "none",
                                 {82.2, 55.1, 71.7, 57.0, 54.2, 83.2, 73.3},
                                 {89.9, 72.2, 86.4, 75.2, 65.6, 93.0, 80.1},
                                 {92.7, 77.4, 90.5, 82.3, 71.5, 93.7, 61.0}};
inline const ModelRows kCtcNone{"4", "ctc", "none",
                                {80.4, 47.8, 66.1, 49.1, 55.2, 81.8, 71.5},
                                {81.0, 56.5, 72.7, 57.6, 57.6, 86.7, 74.3},
                                {87.0, 65.8, 81.9, 68.8, 66.0, 91.6, 73.6}};
inline const ModelRows kCtcPpm{"5", "ctc", "ppm",
                               {76.5, 48.0, 62.8, 47.2, 49.0, 81.6, 68.0},
                               {86.2, 64.2, 79.2, 64.5, 62.1, 90.6, 77.0},
                               {90.9, 76.0, 89.8, 79.2, 76.0, 94.2, 70.1}};
inline const ModelRows kSegNone{"7", "seg", "none",
                                {80.4, 56.1, 71.6, 57.9, 55.2, 84.2, 73.3},
                                {85.4, 65.7, 81.5, 66.4, 64.2, 91.2, 80.6},
                                {88.4, 68.7, 85.7, 72.1, 62.2, 92.3, 78.8}};

// Summary metrics printed for the same four models.
inline const MetricRow kAttnNoneMetrics{85.7, 77.1, 69.6, 76.9};
inline const MetricRow kCtcNoneMetrics{77.8, 92.4, 65.8, 77.1};
inline const MetricRow kCtcPpmMetrics{84.8, 89.5, 63.5, 77.5};
inline const MetricRow kSegNoneMetrics{79.7, 97.3, 69.9, 80.8};

// Printed gap / normalized gap of the attention model trained on LS.
inline constexpr double kAttnLsGap = 32.7;
inline constexpr double kAttnLsNGap = 43.2;

inline vocablab::metrics::RunMatrix matrix_for(const ModelRows& rows) {
  using vocablab::metrics::TrainSet;
  vocablab::metrics::RunMatrix m;
  for (const auto& s : kSubsets) m.add_subset(s.name, s.count, s.in_vocab);
  m.set_heldout_pair("IIIT-I", "IIIT-O");
  for (std::size_t i = 0; i < kSubsets.size(); ++i) {
    m.set_accuracy(TrainSet::RS, kSubsets[i].name, rows.rs[i]);
    m.set_accuracy(TrainSet::MS, kSubsets[i].name, rows.ms[i]);
    m.set_accuracy(TrainSet::LS, kSubsets[i].name, rows.ls[i]);
  }
  return m;
}

}  // namespace fixtures
