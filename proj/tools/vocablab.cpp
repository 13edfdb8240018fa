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

// Command-line front end: synth, train, eval, report, sweep, mutual.

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "vocablab/error.hpp"
#include "vocablab/harness.hpp"

namespace {

using namespace vocablab;
namespace fs = std::filesystem;

void print_error(std::string_view code, const std::string& message) {
  std::cerr << nlohmann::json{{"error", code}, {"message", message}}.dump() << std::endl;
}

std::vector<double> parse_ratios(const std::string& csv) {
  std::vector<double> out;
  std::stringstream in(csv);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidConfig, "bad ratio '" + cell + "'");
    }
  }
  return out;
}

void log_progress(const harness::LogRow& row) {
  std::cerr << "step " << row.step << " loss " << row.loss << " (" << row.seconds << "s)" << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vocabulary reliance lab for scene text recognizers"};
  app.require_subcommand(1);

  harness::SynthArgs synth;
  std::string synth_kind = "ls", synth_out, synth_vocab;
  auto* c_synth = app.add_subcommand("synth", "Render a synthetic dataset");
  c_synth->add_option("--kind", synth_kind, "ls | rs | ms | invoc | outvoc")->required();
  c_synth->add_option("--ratio", synth.ratio, "RS share for ms");
  c_synth->add_option("--count", synth.count, "number of images");
  c_synth->add_option("--seed", synth.seed);
  c_synth->add_option("--out", synth_out)->required();
  c_synth->add_option("--subset", synth.subset, "test-subset name (default: kind)");
  c_synth->add_option("--vocab", synth_vocab, "word list replacing the bundled vocabulary");

  harness::TrainArgs train;
  std::string pred = "attn", cntx = "none", train_data, train_out;
  std::uint64_t model_seed = 1;
  auto* c_train = app.add_subcommand("train", "Train one recognizer");
  c_train->add_option("--pred", pred, "ctc | attn | seg");
  c_train->add_option("--cntx", cntx, "none | blstm | ppm");
  c_train->add_option("--data", train_data)->required();
  c_train->add_option("--steps", train.options.steps);
  c_train->add_option("--seed", model_seed, "model init and batch order");
  c_train->add_option("--batch", train.options.batch_size);
  c_train->add_option("--lr", train.options.adam.lr);
  c_train->add_option("--log-every", train.options.log_every);
  c_train->add_option("--out", train_out)->required();

  harness::EvalArgs eval;
  std::string eval_ckpt, eval_data, eval_out;
  auto* c_eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  c_eval->add_option("--ckpt", eval_ckpt)->required();
  c_eval->add_option("--data", eval_data)->required();
  c_eval->add_option("--out", eval_out, "predictions JSON-lines")->required();

  std::string report_runs, report_out = "report.json";
  auto* c_report = app.add_subcommand("report", "Assemble metric reports from run records");
  c_report->add_option("--runs", report_runs)->required();
  c_report->add_option("--out", report_out);

  harness::SweepArgs sweep;
  std::string sweep_ratios = "0,0.25,0.5,0.75,1", sweep_pred = "attn", sweep_cntx = "none", sweep_out = "sweep";
  auto* c_sweep = app.add_subcommand("sweep", "Train over MS ratios and trace InVoc/OutVoc accuracy");
  c_sweep->add_option("--ratios", sweep_ratios, "comma-separated r values");
  c_sweep->add_option("--pred", sweep_pred);
  c_sweep->add_option("--cntx", sweep_cntx);
  c_sweep->add_option("--count", sweep.train_count, "training images per ratio");
  c_sweep->add_option("--test-count", sweep.test_count);
  c_sweep->add_option("--steps", sweep.options.steps);
  c_sweep->add_option("--seed", sweep.seed);
  c_sweep->add_option("--out", sweep_out);

  harness::MutualArgs mut;
  std::string mut_data, mut_out;
  auto* c_mutual = app.add_subcommand("mutual", "Train an attention/segmentation pair with mutual learning");
  c_mutual->add_option("--data", mut_data)->required();
  c_mutual->add_option("--out", mut_out)->required();
  c_mutual->add_option("--steps", mut.options.steps);
  c_mutual->add_option("--seed", mut.seed);
  c_mutual->add_option("--kl-weight", mut.kl_weight);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 64;
  }

  try {
    if (*c_synth) {
      synth.kind = harness::parse_data_kind(synth_kind);
      synth.out = synth_out;
      if (!synth_vocab.empty()) synth.vocab_file = synth_vocab;
      const auto d = harness::run_synth(synth);
      std::cout << nlohmann::json{{"out", synth_out}, {"count", d.size()}, {"kind", synth_kind}}.dump() << std::endl;
    } else if (*c_train) {
      train.model.pred = models::parse_pred_kind(pred);
      train.model.cntx = models::parse_cntx_kind(cntx);
      train.model.seed = model_seed;
      train.options.seed = model_seed;
      train.options.on_log = log_progress;
      train.data = train_data;
      train.out = train_out;
      const auto r = harness::run_train(train);
      std::cout << nlohmann::json{{"checkpoint", r.checkpoint}, {"seconds", r.seconds}}.dump() << std::endl;
    } else if (*c_eval) {
      eval.checkpoint = eval_ckpt;
      eval.data = eval_data;
      eval.out = eval_out;
      const auto e = harness::run_eval(eval);
      std::cout << nlohmann::json{{"subset", e.subset}, {"count", e.count}, {"accuracy", e.accuracy},
                                  {"in_vocab_rate", e.in_vocab_rate}}
                       .dump()
                << std::endl;
    } else if (*c_report) {
      const auto out = harness::run_report(report_runs, report_out);
      for (const auto& r : out.reports) std::cout << r.to_json() << std::endl;
    } else if (*c_sweep) {
      sweep.ratios = parse_ratios(sweep_ratios);
      sweep.model.pred = models::parse_pred_kind(sweep_pred);
      sweep.model.cntx = models::parse_cntx_kind(sweep_cntx);
      sweep.model.seed = sweep.seed;
      sweep.options.seed = sweep.seed;
      sweep.out = sweep_out;
      for (const auto& row : harness::run_sweep(sweep)) {
        std::cout << nlohmann::json{{"r", row.ratio}, {"acc_in", row.acc_in}, {"acc_out", row.acc_out}, {"gap", row.gap},
                                    {"in_vocab_rate", row.in_vocab_rate}}
                         .dump()
                  << std::endl;
      }
    } else if (*c_mutual) {
      mut.data = mut_data;
      mut.out = mut_out;
      mut.options.seed = mut.seed;
      const auto [a, s] = harness::run_mutual(mut);
      std::cout << nlohmann::json{{"theta1", a.checkpoint}, {"theta2", s.checkpoint}}.dump() << std::endl;
    }
  } catch (const Error& e) {
    print_error(to_string(e.code()), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 0;
}
