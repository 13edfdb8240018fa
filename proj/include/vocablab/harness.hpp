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
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vocablab/autodiff.hpp"
#include "vocablab/dataset.hpp"
#include "vocablab/metrics.hpp"
#include "vocablab/models.hpp"
#include "vocablab/mutual.hpp"

namespace vocablab::harness {

/// Worker threads for evaluation: VOCABLAB_THREADS if set, else the
/// hardware concurrency, never below 1.
int thread_count();

struct LogRow {
  long step = 0;
  double loss = 0;     // mean over the logging window
  double seconds = 0;  // since training started
  std::string to_json() const;
};

struct TrainOptions {
  long steps = 3000;
  int batch_size = 32;
  ad::AdamConfig adam{1e-3, 0.9, 0.999, 1e-8, 5.0};
  std::uint64_t seed = 1;  // batch order; model init comes from ModelConfig::seed
  long log_every = 50;
  std::function<void(const LogRow&)> on_log;
  std::function<bool(const LogRow&)> stop_if;  // checked after on_log; true ends training early
};

/// Sample indices of one training step (with replacement, seeded per step).
std::vector<std::size_t> batch_indices(std::size_t dataset_size, int batch_size, std::uint64_t seed, long step);

/// Runs options.steps Adam updates, fewer only when stop_if fires.
/// Throws InvalidInput on a non-finite loss.
std::vector<LogRow> train_model(models::Recognizer& model, const Dataset& data, const TrainOptions& options);

std::vector<std::string> predict_all(const models::Recognizer& model, const Dataset& data, int threads = 0);

struct Evaluation {
  std::string subset;
  bool in_vocab = false;
  std::string heldout_role;
  std::size_t count = 0;
  double accuracy = 0;       // percent
  double in_vocab_rate = 0;  // fraction, against the dataset's training vocabulary
  std::vector<std::string> predictions;
};

Evaluation evaluate(const models::Recognizer& model, const Dataset& data, int threads = 0);

/// Mutual training for a fixed budget; the log callback sees every step.
std::vector<mutual::StepRecord> train_mutual(mutual::MutualPair& pair, const Dataset& data, const TrainOptions& options,
                                             const std::function<void(const mutual::StepRecord&)>& on_step = {});

// ---- file-level operations behind the CLI ---------------------------------------------

struct RunRecord {
  std::string config_json;  // model config snapshot
  std::string tag;          // "" or "+Mut"
  std::string train_kind;   // rs | ms | ls
  std::string train_data;
  double ratio = 0;
  long steps = 0;
  int batch_size = 0;
  double lr = 0;
  std::uint64_t seed = 0;
  std::string checkpoint;
  double seconds = 0;
  std::map<std::string, Evaluation> evaluations;  // by subset (predictions not stored)
  std::map<std::string, std::string> prediction_files;

  std::string to_json() const;
  static RunRecord from_json(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static RunRecord load(const std::filesystem::path& path);
};

/// Sidecar run record of a checkpoint: "<stem>.run.json".
std::filesystem::path run_record_path(const std::filesystem::path& checkpoint);

struct SynthArgs {
  DataKind kind = DataKind::LS;
  double ratio = 0.5;
  std::size_t count = 20000;
  std::uint64_t seed = 1;
  std::filesystem::path out;
  std::string subset;
  std::optional<std::filesystem::path> vocab_file;  // custom word list, partitioned like the bundled one
};
Dataset run_synth(const SynthArgs& args);

struct TrainArgs {
  models::ModelConfig model;
  std::filesystem::path data;
  std::filesystem::path out;
  TrainOptions options;
};
RunRecord run_train(const TrainArgs& args);

struct EvalArgs {
  std::filesystem::path checkpoint;
  std::filesystem::path data;
  std::filesystem::path out;  // predictions JSON-lines
};
Evaluation run_eval(const EvalArgs& args);

struct ReportOutput {
  std::vector<metrics::MetricsReport> reports;
  std::map<std::string, metrics::RunMatrix> matrices;  // by model key
};
/// Scans `runs_dir` for run records, groups them by model (pred/cntx/tag),
/// and assembles one report per complete group. Writes JSON to `out`, plus
/// CSV and SVG siblings. Throws MissingCell naming the absent run or cell.
ReportOutput run_report(const std::filesystem::path& runs_dir, const std::filesystem::path& out);

/// Groups records into matrices without touching disk.
std::map<std::string, metrics::RunMatrix> build_matrices(const std::vector<RunRecord>& records);

struct SweepRow {
  double ratio = 0;
  double acc_in = 0, acc_out = 0, gap = 0, in_vocab_rate = 0;
};
struct SweepArgs {
  std::vector<double> ratios;
  models::ModelConfig model;
  std::size_t train_count = 20000;
  std::size_t test_count = 1000;
  std::uint64_t seed = 1;
  TrainOptions options;
  std::filesystem::path out;  // directory for sweep.json, sweep.csv, sweep.svg
};
std::vector<SweepRow> run_sweep(const SweepArgs& args);

struct MutualArgs {
  std::filesystem::path data;
  std::filesystem::path out;
  std::uint64_t seed = 1;
  double kl_weight = mutual::kDefaultKlWeight;
  TrainOptions options;
};
std::pair<RunRecord, RunRecord> run_mutual(const MutualArgs& args);

}  // namespace vocablab::harness
