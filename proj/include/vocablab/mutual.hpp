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
#include <string>
#include <vector>

#include "vocablab/autodiff.hpp"
#include "vocablab/models.hpp"

namespace vocablab::mutual {

inline constexpr double kDefaultKlWeight = 1.0;
inline constexpr int kSharedClasses = ClassSet::kNumChars;

/// Per label position: two distributions over the shared character classes
/// (row-major, positions x 42) and a validity mask.
struct AlignedDistributions {
  int positions = 0;
  std::vector<double> p1, p2;
  std::vector<char> valid;
  const double* row1(int i) const { return p1.data() + static_cast<std::size_t>(i) * kSharedClasses; }
  const double* row2(int i) const { return p2.data() + static_cast<std::size_t>(i) * kSharedClasses; }
};

/// Softmax over the first 42 entries of a logit row (special class dropped).
std::vector<double> shared_softmax(const double* logits);

/// Pairs attention step i with segmentation vote i for i < label_length.
/// InvalidInput when label_length is 0 or either sequence is too short.
AlignedDistributions align_logits(const models::LogitSequence& attn_logits, const models::LogitSequence& seg_voted,
                                  std::size_t label_length);

/// sum_k q_k ln(q_k / max(p_k, 1e-12)); terms with q_k = 0 contribute 0.
double kl_term(const std::vector<double>& q, const std::vector<double>& p);
double kl_term(const double* q, const double* p, int k);

struct MutualPair {
  models::Recognizer theta1;  // attention
  models::Recognizer theta2;  // segmentation
  ad::AdamState state1, state2;
  ad::AdamConfig adam;
  double kl_weight = kDefaultKlWeight;

  /// Both models use the NONE context; seeds must differ to keep the
  /// parameter sets distinct.
  MutualPair(std::uint64_t seed1, std::uint64_t seed2, double kl_weight = kDefaultKlWeight,
             const ad::AdamConfig& adam = {});
  MutualPair(models::Recognizer attn, models::Recognizer seg, double kl_weight = kDefaultKlWeight,
             const ad::AdamConfig& adam = {});
};

struct MutualLosses {
  ad::Tensor l1, l2;
  double task1 = 0, task2 = 0;  // attention CE, pixel CE
  double kl1 = 0, kl2 = 0;      // batch-mean sums of KL(p2||p1) and KL(p1||p2)
  int positions = 0;            // unmasked character positions in the batch
};

/// Both pair losses at the current parameters. L1 carries gradient to the
/// attention model only and L2 to the segmentation model only; each peer
/// distribution is a constant target.
MutualLosses mutual_losses(const MutualPair& pair, const models::Batch& batch);

struct StepRecord {
  long step = 0;
  double l1 = 0, l2 = 0;
  double attn_loss = 0, seg_loss = 0;
  double kl1 = 0, kl2 = 0;
  double mean_kl = 0;   // per unmasked position, averaged over both directions
  double p1_shift = 0;  // max |p1 after Theta1 update - p1 before|
  std::string to_json() const;
};

/// One round of alternating optimization: forward both, update Theta1 on L1;
/// forward both again, update Theta2 on L2.
StepRecord mutual_step(MutualPair& pair, const models::Batch& batch);

}  // namespace vocablab::mutual
