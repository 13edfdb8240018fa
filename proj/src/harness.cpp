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

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <nlohmann/json.hpp>

#include "vocablab/error.hpp"
#include "vocablab/harness.hpp"
#include "vocablab/rng.hpp"

namespace vocablab::harness {

namespace {
constexpr std::size_t kEvalChunk = 64;
}  // namespace

int thread_count() {
  if (const char* env = std::getenv("VOCABLAB_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

std::string LogRow::to_json() const {
  return nlohmann::json{{"step", step}, {"loss", loss}, {"seconds", seconds}}.dump();
}

std::vector<std::size_t> batch_indices(std::size_t dataset_size, int batch_size, std::uint64_t seed, long step) {
  if (dataset_size == 0 || batch_size <= 0) throw Error(ErrorCode::InvalidConfig, "empty dataset or batch");
  Rng rng = Rng::derive(derive_seed(seed, 0x55), static_cast<std::uint64_t>(step));
  std::vector<std::size_t> idx(static_cast<std::size_t>(batch_size));
  for (auto& i : idx) i = static_cast<std::size_t>(rng.below(dataset_size));
  return idx;
}

std::vector<LogRow> train_model(models::Recognizer& model, const Dataset& data, const TrainOptions& options) {
  if (options.steps < 0) throw Error(ErrorCode::InvalidConfig, "step budget must be non-negative");
  auto params = model.parameters();
  ad::AdamState state;
  std::vector<LogRow> log;
  const auto start = std::chrono::steady_clock::now();
  double window = 0.0;
  long in_window = 0;
  for (long step = 1; step <= options.steps; ++step) {
    const auto batch = data.batch(batch_indices(data.size(), options.batch_size, options.seed, step));
    const ad::Tensor loss = model.loss(batch);
    const double value = loss.item();
    if (!std::isfinite(value)) {
      throw Error(ErrorCode::InvalidInput, "non-finite training loss at step " + std::to_string(step));
    }
    ad::backward(loss);
    ad::adam_step(params, state, options.adam);
    window += value;
    ++in_window;
    if (options.log_every > 0 && (step % options.log_every == 0 || step == options.steps)) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      log.push_back(LogRow{step, window / static_cast<double>(in_window), secs});
      if (options.on_log) options.on_log(log.back());
      window = 0.0;
      in_window = 0;
      if (options.stop_if && options.stop_if(log.back())) break;
    }
  }
  return log;
}

std::vector<std::string> predict_all(const models::Recognizer& model, const Dataset& data, int threads) {
  const std::size_t n = data.size();
  std::vector<std::string> out(n);
  const std::size_t chunks = (n + kEvalChunk - 1) / kEvalChunk;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c = next++; c < chunks; c = next++) {
      std::vector<std::size_t> idx;
      for (std::size_t i = c * kEvalChunk; i < std::min(n, (c + 1) * kEvalChunk); ++i) idx.push_back(i);
      const auto preds = model.predict(data.batch(idx));
      for (std::size_t j = 0; j < idx.size(); ++j) out[idx[j]] = preds[j];
    }
  };
  const int t = std::min<int>(threads > 0 ? threads : thread_count(), static_cast<int>(std::max<std::size_t>(1, chunks)));
  if (t <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < t; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return out;
}

Evaluation evaluate(const models::Recognizer& model, const Dataset& data, int threads) {
  if (data.size() == 0) throw Error(ErrorCode::InvalidInput, "cannot evaluate on an empty dataset");
  Evaluation e;
  e.subset = data.meta.subset;
  e.in_vocab = data.meta.in_vocab;
  e.heldout_role = data.meta.heldout_role;
  e.count = data.size();
  e.predictions = predict_all(model, data, threads);
  e.accuracy = metrics::accuracy(e.predictions, data.labels());
  e.in_vocab_rate = data.vocabulary.empty() ? 0.0 : metrics::in_vocab_rate(e.predictions, data.vocabulary);
  return e;
}

std::vector<mutual::StepRecord> train_mutual(mutual::MutualPair& pair, const Dataset& data, const TrainOptions& options,
                                             const std::function<void(const mutual::StepRecord&)>& on_step) {
  pair.adam = options.adam;
  std::vector<mutual::StepRecord> log;
  for (long step = 1; step <= options.steps; ++step) {
    const auto batch = data.batch(batch_indices(data.size(), options.batch_size, options.seed, step));
    auto rec = mutual::mutual_step(pair, batch);
    rec.step = step;
    if (!std::isfinite(rec.l1) || !std::isfinite(rec.l2)) {
      throw Error(ErrorCode::InvalidInput, "non-finite mutual loss at step " + std::to_string(step));
    }
    if (on_step) on_step(rec);
    log.push_back(rec);
  }
  return log;
}

}  // namespace vocablab::harness
