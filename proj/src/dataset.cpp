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

#include "vocablab/dataset.hpp"

#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "vocablab/error.hpp"
#include "vocablab/rng.hpp"

namespace vocablab::harness {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string_view to_string(DataKind kind) {
  switch (kind) {
    case DataKind::LS: return "ls";
    case DataKind::RS: return "rs";
    case DataKind::MS: return "ms";
    case DataKind::InVoc: return "invoc";
    case DataKind::OutVoc: return "outvoc";
  }
  return "?";
}

DataKind parse_data_kind(std::string_view s) {
  if (s == "ls") return DataKind::LS;
  if (s == "rs") return DataKind::RS;
  if (s == "ms") return DataKind::MS;
  if (s == "invoc") return DataKind::InVoc;
  if (s == "outvoc") return DataKind::OutVoc;
  throw Error(ErrorCode::InvalidConfig, "unknown dataset kind '" + std::string(s) + "'");
}

void SynthSpec::validate() const {
  if (count == 0) throw Error(ErrorCode::InvalidConfig, "dataset count must be positive");
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw Error(ErrorCode::InvalidConfig, "ratio must lie in [0,1]");
  if (vocab.train.empty()) throw Error(ErrorCode::InvalidConfig, "training vocabulary is empty");
  if (kind == DataKind::OutVoc && vocab.held_out.empty()) {
    throw Error(ErrorCode::InvalidConfig, "held-out vocabulary is empty");
  }
  style.validate();
}

namespace {

std::vector<corpus::WordSample> draw_words(const SynthSpec& spec) {
  using namespace corpus;
  switch (spec.kind) {
    case DataKind::LS:
    case DataKind::InVoc:
      return sample_ls_corpus(spec.vocab.train, spec.count, spec.seed);
    case DataKind::OutVoc:
      return sample_ls_corpus(spec.vocab.held_out, spec.count, spec.seed);
    case DataKind::RS: {
      // Lengths follow the LS set of the same seed.
      const auto ls = sample_ls_corpus(spec.vocab.train, spec.count, spec.seed);
      return sample_rs_corpus(length_histogram(ls), spec.count, derive_seed(spec.seed, 0x52));
    }
    case DataKind::MS: {
      const auto ls = sample_ls_corpus(spec.vocab.train, spec.count, spec.seed);
      const auto rs = sample_rs_corpus(length_histogram(ls), spec.count, derive_seed(spec.seed, 0x52));
      return mix_corpora(rs, ls, CorpusMixSpec{spec.ratio, spec.count, derive_seed(spec.seed, 0x4d)});
    }
  }
  return {};
}

std::string image_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "images/%06zu.pgm", i);
  return buf;
}

json style_json(const render::StyleParams& s) {
  return {{"glyph_scale", s.glyph_scale}, {"spacing_px", s.spacing_px},   {"fg_mean", s.fg_mean},
          {"bg_mean", s.bg_mean},         {"intensity_jitter", s.intensity_jitter}, {"noise_sigma", s.noise_sigma},
          {"blur", s.blur_enabled}};
}

render::StyleParams style_from(const json& j) {
  render::StyleParams s;
  s.glyph_scale = j.value("glyph_scale", s.glyph_scale);
  s.spacing_px = j.value("spacing_px", s.spacing_px);
  s.fg_mean = j.value("fg_mean", s.fg_mean);
  s.bg_mean = j.value("bg_mean", s.bg_mean);
  s.intensity_jitter = j.value("intensity_jitter", s.intensity_jitter);
  s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
  s.blur_enabled = j.value("blur", s.blur_enabled);
  return s;
}

}  // namespace

Dataset synthesize(const SynthSpec& spec) {
  spec.validate();
  const auto words = draw_words(spec);
  Dataset d;
  d.meta.kind = spec.kind;
  d.meta.ratio = spec.kind == DataKind::MS ? spec.ratio : spec.kind == DataKind::RS ? 1.0 : 0.0;
  d.meta.count = spec.count;
  d.meta.seed = spec.seed;
  d.meta.subset = spec.subset.empty() ? std::string(to_string(spec.kind)) : spec.subset;
  d.meta.in_vocab = spec.kind == DataKind::LS || spec.kind == DataKind::InVoc;
  d.meta.heldout_role = spec.kind == DataKind::InVoc ? "in" : spec.kind == DataKind::OutVoc ? "out" : "";
  d.meta.style = spec.style;
  d.vocabulary = spec.vocab.train;
  d.records.reserve(words.size());
  const std::uint64_t render_seed = derive_seed(spec.seed, 0x66);
  for (std::size_t i = 0; i < words.size(); ++i) {
    const auto img = render::rasterize(words[i], spec.style, derive_seed(render_seed, i));
    Record r;
    char id[32];
    std::snprintf(id, sizeof id, "%s-%06zu", std::string(to_string(spec.kind)).c_str(), i);
    r.id = id;
    r.file = image_name(i);
    r.label = words[i].text;
    r.normalized = words[i].normalized;
    r.corpus = words[i].corpus_kind;
    r.case_kind = words[i].case_kind;
    r.boxes = img.char_boxes;
    r.pixels = render::quantize(img.pixels);
    d.records.push_back(std::move(r));
  }
  return d;
}

models::Batch Dataset::batch(const std::vector<std::size_t>& indices) const {
  models::Batch b;
  b.size = static_cast<int>(indices.size());
  const std::size_t per = static_cast<std::size_t>(render::kImageHeight) * render::kImageWidth;
  b.pixels.reserve(per * indices.size());
  for (std::size_t i : indices) {
    const Record& r = records.at(i);
    for (std::uint8_t p : r.pixels) b.pixels.push_back(p / 255.0);
    b.labels.push_back(r.label);
    b.boxes.push_back(r.boxes);
  }
  return b;
}

std::vector<std::string> Dataset::labels() const {
  std::vector<std::string> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.label);
  return out;
}

void Dataset::save(const fs::path& dir) const {
  std::error_code ec;
  fs::create_directories(dir / "images", ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create dataset directory " + dir.string() + ": " + ec.message());
  std::ofstream manifest(dir / "manifest.jsonl");
  if (!manifest) throw Error(ErrorCode::Io, "cannot write " + (dir / "manifest.jsonl").string());
  for (const auto& r : records) {
    render::write_pgm(dir / r.file, r.pixels);
    json boxes = json::array();
    for (const auto& b : r.boxes) boxes.push_back({b.x0, b.y0, b.x1, b.y1});
    manifest << json{{"id", r.id},
                     {"file", r.file},
                     {"label", r.label},
                     {"normalized", r.normalized},
                     {"corpus", corpus::to_string(r.corpus)},
                     {"case", corpus::to_string(r.case_kind)},
                     {"boxes", boxes}}
                    .dump()
             << '\n';
  }
  std::ofstream meta_out(dir / "meta.json");
  meta_out << json{{"kind", to_string(meta.kind)},
                   {"ratio", meta.ratio},
                   {"count", meta.count},
                   {"seed", meta.seed},
                   {"subset", meta.subset},
                   {"in_vocab", meta.in_vocab},
                   {"heldout_role", meta.heldout_role},
                   {"style", style_json(meta.style)},
                   {"classes", ClassSet::standard().signature()}}
                  .dump(2)
           << '\n';
  vocabulary.save(dir / "vocab.txt");
  if (!manifest || !meta_out) throw Error(ErrorCode::Io, "failed writing dataset " + dir.string());
}

Dataset Dataset::load(const fs::path& dir) {
  Dataset d;
  std::ifstream meta_in(dir / "meta.json");
  if (!meta_in) throw Error(ErrorCode::Io, "no dataset at " + dir.string() + " (meta.json missing)");
  try {
    const json m = json::parse(meta_in);
    if (m.value("classes", ClassSet::standard().signature()) != ClassSet::standard().signature()) {
      throw Error(ErrorCode::ClassSetMismatch, "dataset " + dir.string() + " uses a different class set");
    }
    d.meta.kind = parse_data_kind(m.at("kind").get<std::string>());
    d.meta.ratio = m.value("ratio", 0.0);
    d.meta.count = m.at("count").get<std::size_t>();
    d.meta.seed = m.value("seed", std::uint64_t{0});
    d.meta.subset = m.value("subset", std::string(to_string(d.meta.kind)));
    d.meta.in_vocab = m.value("in_vocab", false);
    d.meta.heldout_role = m.value("heldout_role", "");
    d.meta.style = style_from(m.value("style", json::object()));

    std::ifstream manifest(dir / "manifest.jsonl");
    if (!manifest) throw Error(ErrorCode::Io, "missing manifest in " + dir.string());
    std::string line;
    while (std::getline(manifest, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      Record r;
      r.id = j.at("id").get<std::string>();
      r.file = j.at("file").get<std::string>();
      r.label = j.at("label").get<std::string>();
      r.normalized = j.at("normalized").get<std::string>();
      r.corpus = corpus::parse_corpus_kind(j.at("corpus").get<std::string>());
      r.case_kind = corpus::parse_case_kind(j.at("case").get<std::string>());
      for (const auto& b : j.at("boxes")) {
        r.boxes.push_back(render::Box{b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                                      b.at(3).get<double>()});
      }
      r.pixels = render::read_pgm(dir / r.file);
      d.records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, "dataset " + dir.string() + ": " + e.what());
  }
  if (d.records.size() != d.meta.count) {
    throw Error(ErrorCode::Format, "dataset " + dir.string() + " lists " + std::to_string(d.records.size()) +
                                       " rows but meta says " + std::to_string(d.meta.count));
  }
  if (fs::exists(dir / "vocab.txt")) d.vocabulary = corpus::Vocabulary::load(dir / "vocab.txt", "dataset");
  return d;
}

}  // namespace vocablab::harness
