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
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vocablab/autodiff.hpp"
#include "vocablab/classes.hpp"
#include "vocablab/render.hpp"

namespace vocablab::models {

enum class CntxKind { NONE, BLSTM, PPM };

std::string_view to_string(PredKind kind);
std::string_view to_string(CntxKind kind);
PredKind parse_pred_kind(std::string_view s);
CntxKind parse_cntx_kind(std::string_view s);

struct ModelConfig {
  PredKind pred = PredKind::ATTN;
  CntxKind cntx = CntxKind::NONE;
  std::vector<int> trunk_channels{16, 32, 48, 64};
  int blstm_hidden = 64;
  int attn_hidden = 128;
  int attn_embed = 32;
  int attn_dim = 64;
  std::vector<int> ppm_pool_sizes{1, 3, 4, 6};
  int max_decode_steps = 24;
  std::uint64_t seed = 1;

  /// Throws InvalidConfig; segmentation cannot sit on a BLSTM.
  void validate() const;
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
};

/// L positions x K unnormalized scores. `present` marks positions that carry
/// evidence (segmentation votes over empty regions are absent).
struct LogitSequence {
  int length = 0;
  int classes = 0;
  std::vector<double> scores;
  std::vector<char> present;

  LogitSequence() = default;
  LogitSequence(int length, int classes);
  static LogitSequence from_rows(const std::vector<std::vector<double>>& rows);
  double at(int pos, int k) const { return scores[static_cast<std::size_t>(pos) * classes + k]; }
  double& at(int pos, int k) { return scores[static_cast<std::size_t>(pos) * classes + k]; }
  const double* row(int pos) const { return scores.data() + static_cast<std::size_t>(pos) * classes; }
};

// A training or evaluation mini-batch. Pixels are NCHW with C = 1.
struct Batch {
  int size = 0;
  std::vector<double> pixels;
  std::vector<std::string> labels;
  std::vector<std::vector<render::Box>> boxes;

  ad::Tensor images() const;
};

// ---- standalone head operations on plain sequences ---------------------------

/// -log of the total probability of all alignments of `label` (class indices,
/// blank excluded). Throws LabelTooLong when T cannot host the label.
double ctc_loss(const LogitSequence& frames, const std::vector<int>& label, int blank = ClassSet::kSpecial);
/// Per-frame argmax, merge repeats, drop blanks.
std::string ctc_greedy_decode(const LogitSequence& frames, const ClassSet& classes = ClassSet::standard());
/// Mean per-step cross-entropy; `targets` includes the EOS step.
double attn_loss(const LogitSequence& logits, const std::vector<int>& targets);
/// Argmax per step up to the first EOS.
std::string attn_greedy_decode(const LogitSequence& steps, const ClassSet& classes = ClassSet::standard());

struct SegRegion {
  char symbol = 0;
  int class_index = 0;
  int min_x = 0, min_y = 0;
  std::vector<std::pair<int, int>> cells;  // (row, col)
};
struct SegDecoding {
  std::string text;
  std::vector<SegRegion> regions;
};
inline constexpr std::size_t kMinComponentPixels = 2;
/// logits: K+1 channels over an h x w map (CHW). Argmax, 4-connected
/// components of non-background, drop tiny ones, order by min-x then min-y
/// then larger area, class each by the argmax of its mean character logits.
SegDecoding seg_decode(const std::vector<double>& logits, int channels, int height, int width,
                       const ClassSet& classes = ClassSet::standard());
/// One vote per region: mean pixel logit vector, absent when the region is empty.
LogitSequence seg_vote(const std::vector<double>& logits, int channels, int height, int width,
                       const std::vector<std::vector<std::pair<int, int>>>& regions);
/// Shrunken, downscaled ground-truth regions of every character.
std::vector<std::vector<std::pair<int, int>>> char_regions(const std::vector<render::Box>& boxes,
                                                           double factor = render::kDefaultShrink);

// ---- the recognizer ------------------------------------------------------------

struct AttnOutput {
  ad::Tensor logits;                          // [N, steps, K+1]
  std::vector<std::vector<double>> attention;  // per step, N x T weights
};

class Recognizer {
 public:
  explicit Recognizer(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  ad::NamedTensors& named_parameters() { return params_; }
  const ad::NamedTensors& named_parameters() const { return params_; }
  std::vector<ad::Tensor> parameters() const;
  std::size_t parameter_count() const;

  /// FEAT stage: [N,1,32,128] -> [N,C,8,32].
  ad::Tensor feat_extract(const ad::Tensor& images) const;
  /// CNTX stage. Sequence heads get [N,T,C'] frames, segmentation a 2-D map.
  ad::Tensor cntx_apply(const ad::Tensor& fm) const;
  ad::Tensor encode(const ad::Tensor& images) const { return cntx_apply(feat_extract(images)); }

  /// Bidirectional LSTM over [N,T,C] frames -> [N,T,2H]; forward half first.
  ad::Tensor bilstm(const ad::Tensor& frames) const;
  ad::Tensor ctc_logits(const ad::Tensor& frames) const;
  /// Teacher forcing feeds ground truth and runs max(|label|)+1 steps;
  /// otherwise greedy feedback until every sample emits EOS or the step cap.
  AttnOutput attn_forward(const ad::Tensor& frames, const std::vector<std::vector<int>>& labels,
                          bool teacher_forcing) const;
  ad::Tensor seg_forward(const ad::Tensor& fm) const;

  /// Head-specific task loss of a batch (CTC NLL, attention CE, pixel CE).
  ad::Tensor loss(const Batch& batch) const;
  /// Greedy transcription of every image (no gradient recorded).
  std::vector<std::string> predict(const Batch& batch) const;

  /// Teacher-forced attention logits [N,S,K+1] for the batch labels.
  ad::Tensor attn_train_logits(const Batch& batch) const;
  /// Segmentation votes [P,K+1], one row per ground-truth character in batch
  /// order; `present` gets 0 for characters whose region is empty.
  ad::Tensor seg_char_votes(const ad::Tensor& seg_logits, const Batch& batch, std::vector<char>* present) const;
  ad::Tensor attn_loss_from_logits(const ad::Tensor& logits, const std::vector<std::vector<int>>& targets) const;
  ad::Tensor seg_loss_from_logits(const ad::Tensor& logits, const Batch& batch) const;

  void save(const std::string& path) const;
  static Recognizer load(const std::string& path);
  /// Companion config file of a checkpoint: same stem, .json extension.
  static std::string config_path_for(const std::string& checkpoint_path);

  int frame_channels() const;

 private:
  ad::Tensor param(const std::string& name) const;
  ad::Tensor add_param(const std::string& name, ad::Shape shape, double bound);
  ad::Tensor lstm_direction(const ad::Tensor& frames, const std::string& prefix, bool reverse) const;

  ModelConfig config_;
  ad::NamedTensors params_;
};

// ---- losses over tensors (used by Recognizer::loss and tests) --------------------

/// Per-step cross-entropy averaged per sample then over the batch.
ad::Tensor sequence_cross_entropy(const ad::Tensor& logits, const std::vector<std::vector<int>>& targets);
/// Mean per-pixel cross-entropy of [N,K,H,W] logits.
ad::Tensor pixel_cross_entropy(const ad::Tensor& logits, const std::vector<render::SegTarget>& targets);

}  // namespace vocablab::models
