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
#include <chrono>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vocablab/error.hpp"
#include "vocablab/harness.hpp"
#include "vocablab/rng.hpp"
#include "vocablab/svg.hpp"

namespace vocablab::harness {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorCode::Io, "cannot create directory " + dir.string());
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Same rule as the bundled list: every fourth word is held out.
corpus::VocabularyPartition partition_words(const std::vector<std::string>& words, const std::string& tag) {
  std::vector<std::string> train, held;
  for (std::size_t i = 0; i < words.size(); ++i) (i % 4 == 3 ? held : train).push_back(words[i]);
  return {corpus::Vocabulary(train, tag + ":train"), corpus::Vocabulary(held, tag + ":held_out")};
}

json evaluation_json(const Evaluation& e) {
  return {{"subset", e.subset},         {"count", e.count},
          {"accuracy", e.accuracy},     {"in_vocab", e.in_vocab},
          {"heldout_role", e.heldout_role}, {"in_vocab_rate", e.in_vocab_rate}};
}

Evaluation evaluation_from(const json& j) {
  Evaluation e;
  e.subset = j.at("subset").get<std::string>();
  e.count = j.at("count").get<std::size_t>();
  e.accuracy = j.at("accuracy").get<double>();
  e.in_vocab = j.value("in_vocab", false);
  e.heldout_role = j.value("heldout_role", "");
  e.in_vocab_rate = j.value("in_vocab_rate", 0.0);
  return e;
}

std::string model_key(const RunRecord& r) {
  const auto cfg = json::parse(r.config_json);
  return cfg.at("pred").get<std::string>() + "/" + cfg.at("cntx").get<std::string>() + r.tag;
}

void write_predictions(const fs::path& path, const Dataset& data, const Evaluation& e) {
  std::ostringstream out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << json{{"id", data.records[i].id}, {"gt", data.records[i].label}, {"pred", e.predictions[i]}}.dump() << '\n';
  }
  write_text(path, out.str());
}

}  // namespace

// ---- RunRecord ---------------------------------------------------------------------

std::string RunRecord::to_json() const {
  json evals = json::object(), preds = json::object();
  for (const auto& [k, e] : evaluations) evals[k] = evaluation_json(e);
  for (const auto& [k, p] : prediction_files) preds[k] = p;
  return json{{"config", json::parse(config_json)},
              {"tag", tag},
              {"train_kind", train_kind},
              {"train_data", train_data},
              {"ratio", ratio},
              {"steps", steps},
              {"batch_size", batch_size},
              {"lr", lr},
              {"seed", seed},
              {"checkpoint", checkpoint},
              {"seconds", seconds},
              {"evaluations", evals},
              {"predictions", preds}}
      .dump(2);
}

RunRecord RunRecord::from_json(const std::string& text) {
  RunRecord r;
  try {
    const json j = json::parse(text);
    r.config_json = j.at("config").dump();
    r.tag = j.value("tag", "");
    r.train_kind = j.at("train_kind").get<std::string>();
    r.train_data = j.value("train_data", "");
    r.ratio = j.value("ratio", 0.0);
    r.steps = j.at("steps").get<long>();
    r.batch_size = j.value("batch_size", 0);
    r.lr = j.value("lr", 0.0);
    r.seed = j.value("seed", std::uint64_t{0});
    r.checkpoint = j.value("checkpoint", "");
    r.seconds = j.value("seconds", 0.0);
    const json evals = j.value("evaluations", json::object());
    const json preds = j.value("predictions", json::object());
    for (const auto& [k, v] : evals.items()) r.evaluations[k] = evaluation_from(v);
    for (const auto& [k, v] : preds.items()) r.prediction_files[k] = v.get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, std::string("run record: ") + e.what());
  }
  return r;
}

void RunRecord::save(const fs::path& path) const { write_text(path, to_json() + "\n"); }

RunRecord RunRecord::load(const fs::path& path) { return from_json(read_text(path)); }

fs::path run_record_path(const fs::path& checkpoint) {
  fs::path p = checkpoint;
  p.replace_extension(".run.json");
  return p;
}

// ---- synth / train / eval ------------------------------------------------------------

Dataset run_synth(const SynthArgs& args) {
  SynthSpec spec;
  spec.kind = args.kind;
  spec.ratio = args.ratio;
  spec.count = args.count;
  spec.seed = args.seed;
  spec.subset = args.subset;
  if (args.vocab_file) spec.vocab = partition_words(corpus::read_word_list(*args.vocab_file), args.vocab_file->string());
  spec.validate();
  ensure_dir(args.out);
  Dataset d = synthesize(spec);
  d.save(args.out);
  return d;
}

RunRecord run_train(const TrainArgs& args) {
  args.model.validate();  // pre-flight, before touching data
  if (args.options.steps <= 0 || args.options.batch_size <= 0) {
    throw Error(ErrorCode::InvalidConfig, "steps and batch size must be positive");
  }
  const Dataset data = Dataset::load(args.data);
  ensure_dir(args.out);
  models::Recognizer model(args.model);
  std::ofstream log(args.out / "train_log.jsonl");
  if (!log) throw Error(ErrorCode::Io, "cannot write training log in " + args.out.string());
  TrainOptions opts = args.options;
  opts.on_log = [&](const LogRow& row) {
    log << row.to_json() << '\n';
    log.flush();
    if (args.options.on_log) args.options.on_log(row);
  };
  const auto start = std::chrono::steady_clock::now();
  train_model(model, data, opts);
  const fs::path ckpt = args.out / "model.ckpt";
  model.save(ckpt.string());

  RunRecord r;
  r.config_json = args.model.to_json();
  r.train_kind = std::string(to_string(data.meta.kind));
  r.train_data = args.data.string();
  r.ratio = data.meta.ratio;
  r.steps = opts.steps;
  r.batch_size = opts.batch_size;
  r.lr = opts.adam.lr;
  r.seed = opts.seed;
  r.checkpoint = ckpt.string();
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  r.save(run_record_path(ckpt));
  return r;
}

Evaluation run_eval(const EvalArgs& args) {
  const models::Recognizer model = models::Recognizer::load(args.checkpoint.string());
  const Dataset data = Dataset::load(args.data);
  Evaluation e = evaluate(model, data);
  write_predictions(args.out, data, e);
  fs::path summary = args.out;
  summary.replace_extension(".summary.json");
  write_text(summary, evaluation_json(e).dump(2) + "\n");
  const fs::path rec_path = run_record_path(args.checkpoint);
  if (fs::exists(rec_path)) {
    RunRecord r = RunRecord::load(rec_path);
    Evaluation stored = e;
    stored.predictions.clear();
    r.evaluations[e.subset] = stored;
    r.prediction_files[e.subset] = args.out.string();
    r.save(rec_path);
  }
  return e;
}

// ---- report --------------------------------------------------------------------------

std::map<std::string, metrics::RunMatrix> build_matrices(const std::vector<RunRecord>& records) {
  std::map<std::string, std::vector<const RunRecord*>> groups;
  for (const auto& r : records) groups[model_key(r)].push_back(&r);
  std::map<std::string, metrics::RunMatrix> out;
  for (const auto& [key, runs] : groups) {
    std::set<long> budgets;
    for (const auto* r : runs) budgets.insert(r->steps);
    if (budgets.size() > 1) {
      throw Error(ErrorCode::InvalidConfig, key + ": training sets were given different step budgets");
    }
    metrics::RunMatrix m;
    std::string hin, hout;
    std::set<metrics::TrainSet> seen;
    for (const auto* r : runs) {
      const auto t = metrics::parse_train_set(r->train_kind);
      if (!seen.insert(t).second) {
        throw Error(ErrorCode::InvalidConfig, key + ": more than one " + r->train_kind + " run");
      }
      for (const auto& [name, e] : r->evaluations) {
        bool known = false;
        for (const auto& s : m.subsets()) {
          if (s.name != name) continue;
          known = true;
          if (s.count != e.count) {
            throw Error(ErrorCode::InvalidConfig, key + ": subset " + name + " evaluated with differing sizes");
          }
        }
        if (!known) m.add_subset(name, e.count, e.in_vocab);
        if (e.heldout_role == "in") hin = name;
        if (e.heldout_role == "out") hout = name;
        m.set_accuracy(t, name, e.accuracy);
      }
    }
    if (!hin.empty() && !hout.empty()) {
      m.set_heldout_pair(hin, hout);
      for (const auto* r : runs) {
        const auto it = r->evaluations.find(hout);
        if (it != r->evaluations.end()) m.set_in_vocab_rate(metrics::parse_train_set(r->train_kind), it->second.in_vocab_rate);
      }
    }
    out.emplace(key, std::move(m));
  }
  return out;
}

ReportOutput run_report(const fs::path& runs_dir, const fs::path& out) {
  if (!fs::is_directory(runs_dir)) throw Error(ErrorCode::Io, "no runs directory " + runs_dir.string());
  std::vector<fs::path> paths;
  for (const auto& entry : fs::recursive_directory_iterator(runs_dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() > 9 && name.ends_with(".run.json")) paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw Error(ErrorCode::MissingCell, "no run records under " + runs_dir.string());
  std::vector<RunRecord> records;
  for (const auto& p : paths) records.push_back(RunRecord::load(p));

  ReportOutput result;
  result.matrices = build_matrices(records);
  json all = json::array();
  std::ostringstream csv;
  std::vector<svg::Series> radar;
  std::vector<svg::Point> scatter;
  for (const auto& [key, m] : result.matrices) {
    const auto slash = key.find('/');
    std::string cntx = key.substr(slash + 1);
    const auto plus = cntx.find('+');
    metrics::MetricsReport rep;
    try {
      rep = metrics::assemble_report(m, key.substr(0, slash), plus == std::string::npos ? cntx : cntx.substr(0, plus));
    } catch (const Error& e) {
      throw Error(e.code(), key + ": " + e.what());
    }
    json j = json::parse(rep.to_json());
    j["model"]["key"] = key;
    all.push_back(j);
    csv << "# model " << key << '\n' << metrics::report_csv(m, rep) << '\n';
    const auto ga = rep.ga.count(metrics::TrainSet::LS) ? rep.ga.at(metrics::TrainSet::LS) : 0.0;
    radar.push_back({key, {ga, rep.va, rep.vg, rep.oa, rep.hm}});
    scatter.push_back({key, rep.va, rep.vg});
    result.reports.push_back(rep);
  }
  write_text(out, all.dump(2) + "\n");
  fs::path base = out;
  base.replace_extension("");
  write_text(base.string() + ".csv", csv.str());
  write_text(base.string() + "_radar.svg", svg::radar_chart("Metrics per model", {"GA(LS)", "VA", "VG", "OA", "HM"}, radar));
  write_text(base.string() + "_scatter.svg", svg::scatter_chart("Vocabulary learning vs generalization", "VA", "VG", scatter));
  return result;
}

// ---- sweep / mutual --------------------------------------------------------------------

std::vector<SweepRow> run_sweep(const SweepArgs& args) {
  if (args.ratios.empty()) throw Error(ErrorCode::InvalidConfig, "sweep needs at least one ratio");
  for (double r : args.ratios) {
    if (!(r >= 0.0 && r <= 1.0)) throw Error(ErrorCode::InvalidConfig, "sweep ratios must lie in [0,1]");
  }
  args.model.validate();
  ensure_dir(args.out);
  SynthSpec test;
  test.count = args.test_count;
  test.kind = DataKind::InVoc;
  test.seed = derive_seed(args.seed, 0x1001);
  const Dataset in_set = synthesize(test);
  test.kind = DataKind::OutVoc;
  test.seed = derive_seed(args.seed, 0x1002);
  const Dataset out_set = synthesize(test);

  std::vector<SweepRow> rows;
  for (double r : args.ratios) {
    SynthSpec train;
    train.kind = DataKind::MS;
    train.ratio = r;
    train.count = args.train_count;
    train.seed = derive_seed(args.seed, 0x2000);
    const Dataset data = synthesize(train);
    models::Recognizer model(args.model);
    train_model(model, data, args.options);
    const Evaluation a = evaluate(model, in_set), b = evaluate(model, out_set);
    rows.push_back(SweepRow{r, a.accuracy, b.accuracy, metrics::gap(a.accuracy, b.accuracy), b.in_vocab_rate});
  }

  json j = json::array();
  std::ostringstream csv;
  csv << "r,acc_in,acc_out,gap,in_vocab_rate\n";
  std::vector<double> xs;
  svg::Series s_in{"InVoc accuracy", {}}, s_out{"OutVoc accuracy", {}}, s_gap{"Gap", {}}, s_rate{"in-vocab rate (%)", {}};
  for (const auto& row : rows) {
    j.push_back({{"r", row.ratio}, {"acc_in", row.acc_in}, {"acc_out", row.acc_out}, {"gap", row.gap},
                 {"in_vocab_rate", row.in_vocab_rate}});
    csv << row.ratio << ',' << row.acc_in << ',' << row.acc_out << ',' << row.gap << ',' << row.in_vocab_rate << '\n';
    xs.push_back(row.ratio);
    s_in.values.push_back(row.acc_in);
    s_out.values.push_back(row.acc_out);
    s_gap.values.push_back(row.gap);
    s_rate.values.push_back(100.0 * row.in_vocab_rate);
  }
  write_text(args.out / "sweep.json", j.dump(2) + "\n");
  write_text(args.out / "sweep.csv", csv.str());
  write_text(args.out / "sweep.svg", svg::line_chart("Accuracy vs RS ratio r", "r", "percent", xs, {s_in, s_out, s_gap, s_rate}));
  return rows;
}

std::pair<RunRecord, RunRecord> run_mutual(const MutualArgs& args) {
  if (args.options.steps <= 0 || args.options.batch_size <= 0) {
    throw Error(ErrorCode::InvalidConfig, "steps and batch size must be positive");
  }
  const Dataset data = Dataset::load(args.data);
  ensure_dir(args.out);
  mutual::MutualPair pair(args.seed, args.seed + 1, args.kl_weight, args.options.adam);
  std::ofstream log(args.out / "mutual_log.jsonl");
  if (!log) throw Error(ErrorCode::Io, "cannot write mutual log in " + args.out.string());
  const auto start = std::chrono::steady_clock::now();
  train_mutual(pair, data, args.options, [&](const mutual::StepRecord& rec) { log << rec.to_json() << '\n'; });
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  auto record_for = [&](const models::Recognizer& model, const std::string& name) {
    const fs::path ckpt = args.out / (name + ".ckpt");
    model.save(ckpt.string());
    RunRecord r;
    r.config_json = model.config().to_json();
    r.tag = "+Mut";
    r.train_kind = std::string(to_string(data.meta.kind));
    r.train_data = args.data.string();
    r.ratio = data.meta.ratio;
    r.steps = args.options.steps;
    r.batch_size = args.options.batch_size;
    r.lr = args.options.adam.lr;
    r.seed = args.options.seed;
    r.checkpoint = ckpt.string();
    r.seconds = secs;
    r.save(run_record_path(ckpt));
    return r;
  };
  return {record_for(pair.theta1, "theta1"), record_for(pair.theta2, "theta2")};
}

}  // namespace vocablab::harness
