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

#include "vocablab/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vocablab/error.hpp"

namespace vocablab::metrics {

using json = nlohmann::json;

std::string comparison_key(std::string_view s) {
  std::string out;
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (std::ispunct(u) || std::isspace(u)) continue;
    out.push_back(static_cast<char>(std::tolower(u)));
  }
  return out;
}

bool words_match(std::string_view pred, std::string_view gt) { return comparison_key(pred) == comparison_key(gt); }

double accuracy(const std::vector<std::string>& predictions, const std::vector<std::string>& ground_truths) {
  if (predictions.size() != ground_truths.size()) {
    throw Error(ErrorCode::ShapeMismatch, std::to_string(predictions.size()) + " predictions vs " +
                                              std::to_string(ground_truths.size()) + " ground truths");
  }
  if (predictions.empty()) throw Error(ErrorCode::InvalidInput, "accuracy of an empty list");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) hits += words_match(predictions[i], ground_truths[i]);
  return 100.0 * static_cast<double>(hits) / static_cast<double>(predictions.size());
}

double in_vocab_rate(const std::vector<std::string>& predictions, const corpus::Vocabulary& vocab) {
  if (predictions.empty()) throw Error(ErrorCode::InvalidInput, "in-vocabulary rate of no predictions");
  std::size_t hits = 0;
  for (const auto& p : predictions) {
    const std::string key = comparison_key(p);
    hits += !key.empty() && vocab.contains_normalized(key);
  }
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

double gap(double acc_in, double acc_out) { return acc_in - acc_out; }

double normalized_gap(double gap_points, double acc_all) {
  if (!(acc_all > 0)) throw Error(ErrorCode::InvalidInput, "normalized gap needs positive overall accuracy");
  return 100.0 * gap_points / acc_all;
}

double vocab_generalization(double gap_ls, double gap_rs) { return 100.0 - (gap_ls - gap_rs); }

double harmonic_mean(double oa, double va, double vg) {
  if (!(oa > 0 && va > 0 && vg > 0)) throw Error(ErrorCode::InvalidInput, "harmonic mean needs positive inputs");
  return 3.0 / (1.0 / oa + 1.0 / va + 1.0 / vg);
}

std::string_view to_string(TrainSet t) {
  switch (t) {
    case TrainSet::RS: return "RS";
    case TrainSet::MS: return "MS";
    case TrainSet::LS: return "LS";
  }
  return "?";
}

TrainSet parse_train_set(std::string_view s) {
  std::string up(s);
  for (char& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (up == "RS") return TrainSet::RS;
  if (up == "MS") return TrainSet::MS;
  if (up == "LS") return TrainSet::LS;
  throw Error(ErrorCode::InvalidInput, "unknown training set '" + std::string(s) + "'");
}

// ---- RunMatrix -------------------------------------------------------------------

void RunMatrix::add_subset(const std::string& name, std::size_t count, bool in_vocab) {
  if (name.empty() || count == 0) throw Error(ErrorCode::InvalidInput, "subset needs a name and a positive count");
  for (const auto& s : subsets_) {
    if (s.name == name) throw Error(ErrorCode::InvalidInput, "duplicate subset '" + name + "'");
  }
  subsets_.push_back(Subset{name, count, in_vocab});
}

const Subset& RunMatrix::subset(const std::string& name) const {
  for (const auto& s : subsets_) {
    if (s.name == name) return s;
  }
  throw Error(ErrorCode::MissingCell, "unknown test subset '" + name + "'");
}

void RunMatrix::set_heldout_pair(const std::string& in_subset, const std::string& out_subset) {
  subset(in_subset);
  subset(out_subset);
  heldout_in_ = in_subset;
  heldout_out_ = out_subset;
}

void RunMatrix::set_accuracy(TrainSet train, const std::string& name, double percent) {
  subset(name);
  if (!(percent >= 0.0 && percent <= 100.0)) {
    throw Error(ErrorCode::InvalidInput, "accuracy " + std::to_string(percent) + " outside [0,100]");
  }
  acc_[{train, name}] = percent;
}

void RunMatrix::set_in_vocab_rate(TrainSet train, double rate) { in_vocab_rate_[train] = rate; }

std::optional<double> RunMatrix::accuracy(TrainSet train, const std::string& name) const {
  const auto it = acc_.find({train, name});
  if (it == acc_.end()) return std::nullopt;
  return it->second;
}

double RunMatrix::require(TrainSet train, const std::string& name) const {
  if (auto a = accuracy(train, name)) return *a;
  throw Error(ErrorCode::MissingCell, "missing cell " + std::string(to_string(train)) + "/" + name);
}

bool RunMatrix::has_train_set(TrainSet train) const {
  return std::any_of(acc_.begin(), acc_.end(), [&](const auto& kv) { return kv.first.first == train; });
}

std::optional<double> RunMatrix::in_vocab_rate(TrainSet train) const {
  const auto it = in_vocab_rate_.find(train);
  if (it == in_vocab_rate_.end()) return std::nullopt;
  return it->second;
}

double RunMatrix::weighted(TrainSet train, const std::vector<std::string>& names) const {
  if (names.empty()) throw Error(ErrorCode::MissingCell, "no subsets to average");
  double num = 0.0, den = 0.0;
  for (const auto& n : names) {
    const double w = static_cast<double>(subset(n).count);
    num += w * require(train, n);
    den += w;
  }
  return num / den;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& s) {
  double v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw Error(ErrorCode::Format, "not a number: '" + s + "'");
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::string RunMatrix::to_csv() const {
  std::ostringstream out;
  out << "train";
  for (const auto& s : subsets_) out << ',' << s.name;
  out << ",AVG,Gap,NGap\ncount";
  for (const auto& s : subsets_) out << ',' << s.count;
  out << ",,,\nomega";
  for (const auto& s : subsets_) out << ',' << (s.in_vocab ? 1 : 0);
  out << ",,,\nheldout";
  for (const auto& s : subsets_) out << ',' << (s.name == heldout_in_ ? "in" : s.name == heldout_out_ ? "out" : "");
  out << ",,,\n";
  for (TrainSet t : kTrainSets) {
    if (!has_train_set(t)) continue;
    out << to_string(t);
    bool complete = true;
    for (const auto& s : subsets_) {
      const auto a = accuracy(t, s.name);
      out << ',' << (a ? fmt(*a) : "");
      complete = complete && a.has_value();
    }
    // Derived columns for reading; ignored when parsing.
    if (complete) {
      double sum = 0.0;
      for (const auto& s : subsets_) sum += *accuracy(t, s.name);
      out << ',' << fmt(sum / static_cast<double>(subsets_.size()));
    } else {
      out << ',';
    }
    const auto ai = heldout_in_.empty() ? std::nullopt : accuracy(t, heldout_in_);
    const auto ao = heldout_out_.empty() ? std::nullopt : accuracy(t, heldout_out_);
    if (ai && ao) {
      const double g = gap(*ai, *ao);
      const double all = weighted(t, {heldout_in_, heldout_out_});
      out << ',' << fmt(g) << ',' << (all > 0 ? fmt(normalized_gap(g, all)) : "");
    } else {
      out << ",,";
    }
    out << '\n';
  }
  return out.str();
}

RunMatrix RunMatrix::from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) break;
    rows.push_back(split_csv(line));
  }
  if (rows.size() < 4 || rows[0].empty() || rows[0][0] != "train" || rows[1][0] != "count" || rows[2][0] != "omega" ||
      rows[3][0] != "heldout") {
    throw Error(ErrorCode::Format, "run matrix CSV lacks its header rows");
  }
  const auto& head = rows[0];
  std::size_t n = 0;
  while (n + 1 < head.size() && head[n + 1] != "AVG") ++n;
  RunMatrix m;
  std::string hin, hout;
  for (std::size_t j = 1; j <= n; ++j) {
    if (rows[1].size() <= j || rows[2].size() <= j) throw Error(ErrorCode::Format, "short header row in run matrix CSV");
    m.add_subset(head[j], static_cast<std::size_t>(parse_double(rows[1][j])), rows[2][j] == "1");
    if (rows[3].size() > j && rows[3][j] == "in") hin = head[j];
    if (rows[3].size() > j && rows[3][j] == "out") hout = head[j];
  }
  if (!hin.empty() && !hout.empty()) m.set_heldout_pair(hin, hout);
  for (std::size_t r = 4; r < rows.size(); ++r) {
    const TrainSet t = parse_train_set(rows[r][0]);
    for (std::size_t j = 1; j <= n && j < rows[r].size(); ++j) {
      if (!rows[r][j].empty()) m.set_accuracy(t, head[j], parse_double(rows[r][j]));
    }
  }
  return m;
}

// ---- report ------------------------------------------------------------------------

MetricsReport assemble_report(const RunMatrix& m, const std::string& pred, const std::string& cntx) {
  if (m.subsets().empty()) throw Error(ErrorCode::MissingCell, "run matrix has no test subsets");
  if (m.heldout_in().empty() || m.heldout_out().empty()) {
    throw Error(ErrorCode::MissingCell, "run matrix has no held-out InVoc/OutVoc pair");
  }
  std::vector<std::string> all, omega;
  for (const auto& s : m.subsets()) {
    all.push_back(s.name);
    if (s.in_vocab) omega.push_back(s.name);
  }
  if (omega.empty()) throw Error(ErrorCode::MissingCell, "run matrix marks no subset as in-vocabulary");
  for (TrainSet t : {TrainSet::RS, TrainSet::LS}) {
    for (const auto& s : all) m.require(t, s);
  }

  MetricsReport r;
  r.pred = pred;
  r.cntx = cntx;
  for (TrainSet t : kTrainSets) {
    if (!m.has_train_set(t)) continue;
    r.ga[t] = m.weighted(t, all);
    const double g = gap(m.require(t, m.heldout_in()), m.require(t, m.heldout_out()));
    r.gap[t] = g;
    r.ngap[t] = normalized_gap(g, m.weighted(t, {m.heldout_in(), m.heldout_out()}));
    if (auto rate = m.in_vocab_rate(t)) r.in_vocab_rate[t] = *rate;
  }
  r.oa = m.weighted(TrainSet::RS, all);
  r.va = m.weighted(TrainSet::LS, omega);
  r.vg = vocab_generalization(r.gap[TrainSet::LS], r.gap[TrainSet::RS]);
  r.hm = harmonic_mean(r.oa, r.va, r.vg);
  return r;
}

namespace {
json per_train(const std::map<TrainSet, double>& values) {
  json j = json::object();
  for (TrainSet t : kTrainSets) {
    std::string key(to_string(t));
    for (char& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    const auto it = values.find(t);
    j[key] = it == values.end() ? json(nullptr) : json(it->second);
  }
  return j;
}

std::map<TrainSet, double> read_per_train(const json& j) {
  std::map<TrainSet, double> out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_null()) out[parse_train_set(it.key())] = it.value().get<double>();
  }
  return out;
}
}  // namespace

std::string MetricsReport::to_json() const {
  json j;
  j["model"] = {{"pred", pred}, {"cntx", cntx}};
  j["ga"] = per_train(ga);
  j["oa"] = oa;
  j["va"] = va;
  j["vg"] = vg;
  j["hm"] = hm;
  j["gap"] = per_train(gap);
  j["ngap"] = per_train(ngap);
  j["in_vocab_rate"] = per_train(in_vocab_rate);
  return j.dump(2);
}

MetricsReport MetricsReport::from_json(const std::string& text) {
  MetricsReport r;
  try {
    const json j = json::parse(text);
    r.pred = j.at("model").value("pred", "");
    r.cntx = j.at("model").value("cntx", "");
    r.ga = read_per_train(j.at("ga"));
    r.gap = read_per_train(j.at("gap"));
    r.ngap = read_per_train(j.at("ngap"));
    r.in_vocab_rate = read_per_train(j.value("in_vocab_rate", json::object()));
    r.oa = j.at("oa").get<double>();
    r.va = j.at("va").get<double>();
    r.vg = j.at("vg").get<double>();
    r.hm = j.at("hm").get<double>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, std::string("metrics report: ") + e.what());
  }
  return r;
}

std::string report_csv(const RunMatrix& matrix, const MetricsReport& report) {
  std::ostringstream out;
  out << matrix.to_csv() << "\nmetric,value\n";
  for (const auto& [t, v] : report.ga) out << "GA_" << to_string(t) << ',' << fmt(v) << '\n';
  out << "VA," << fmt(report.va) << "\nVG," << fmt(report.vg) << "\nOA," << fmt(report.oa) << "\nHM," << fmt(report.hm)
      << '\n';
  return out.str();
}

}  // namespace vocablab::metrics
