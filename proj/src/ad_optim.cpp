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
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "vocablab/autodiff.hpp"
#include "vocablab/error.hpp"
#include "vocablab/rng.hpp"

namespace vocablab::ad {
namespace {

double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

}  // namespace

double grad_check(const std::function<Tensor(const Tensor&)>& f, const std::vector<double>& point, const Shape& shape,
                  double epsilon) {
  Tensor x = Tensor::from(shape, point, true);
  Tensor y = f(x);
  backward(y);
  const std::vector<double> analytic = x.has_grad() ? x.grad() : std::vector<double>(point.size(), 0.0);

  NoGradGuard guard;
  double worst = 0.0;
  std::vector<double> probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    probe[i] = point[i] + epsilon;
    const double up = f(Tensor::from(shape, probe)).item();
    probe[i] = point[i] - epsilon;
    const double down = f(Tensor::from(shape, probe)).item();
    probe[i] = point[i];
    worst = std::max(worst, rel_error(analytic[i], (up - down) / (2.0 * epsilon)));
  }
  return worst;
}

double grad_check_params(const std::function<Tensor()>& loss_fn, const std::vector<Tensor>& params, double epsilon,
                         std::size_t max_coords, std::uint64_t seed) {
  for (auto p : params) {
    if (p.has_grad()) p.zero_grad();
  }
  backward(loss_fn());
  std::vector<std::vector<double>> analytic;
  for (auto p : params) analytic.push_back(p.has_grad() ? p.grad() : std::vector<double>(p.size(), 0.0));

  NoGradGuard guard;
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor p = params[k];
    auto& values = p.values();
    std::vector<std::size_t> coords(values.size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (max_coords != 0 && coords.size() > max_coords) {
      for (std::size_t i = 0; i < max_coords; ++i) {
        std::swap(coords[i], coords[i + static_cast<std::size_t>(rng.below(coords.size() - i))]);
      }
      coords.resize(max_coords);
    }
    for (std::size_t i : coords) {
      const double saved = values[i];
      values[i] = saved + epsilon;
      const double up = loss_fn().item();
      values[i] = saved - epsilon;
      const double down = loss_fn().item();
      values[i] = saved;
      worst = std::max(worst, rel_error(analytic[k][i], (up - down) / (2.0 * epsilon)));
    }
  }
  return worst;
}

void adam_step(std::vector<Tensor>& params, AdamState& state, const AdamConfig& config) {
  if (state.m.size() != params.size()) {
    state.m.clear();
    state.v.clear();
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
    state.step = 0;
  }
  double clip = 1.0;
  if (config.clip_norm > 0.0) {
    double sq = 0.0;
    for (auto& p : params) {
      if (!p.has_grad()) continue;
      for (double g : p.grad()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > config.clip_norm) clip = config.clip_norm / norm;
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& values = params[k].values();
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (m.size() != values.size()) throw Error(ErrorCode::ShapeMismatch, "adam_step: optimizer state does not match parameter");
    const bool has = params[k].has_grad();
    const double* grad = has ? params[k].grad().data() : nullptr;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = has ? grad[i] * clip : 0.0;
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      values[i] -= config.lr * mhat / (std::sqrt(vhat) + config.eps);
    }
    if (has) params[k].zero_grad();
  }
}

void save_checkpoint(const std::string& path, const NamedTensors& params, const std::string& meta_json) {
  nlohmann::json header;
  header["version"] = kCheckpointVersion;
  header["meta"] = nlohmann::json::parse(meta_json);
  header["params"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : params) {
    header["params"].push_back({{"name", name}, {"shape", t.shape()}, {"dtype", "f64"}, {"byte_offset", offset}});
    offset += t.size() * sizeof(double);
  }
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write checkpoint " + path);
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, t] : params) {
    out.write(reinterpret_cast<const char*>(t.values().data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!out) throw Error(ErrorCode::Io, "short write to checkpoint " + path);
}

std::string load_checkpoint(const std::string& path, NamedTensors& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open checkpoint " + path);
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len > (1u << 26)) throw Error(ErrorCode::Format, "bad checkpoint header in " + path);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Format, "checkpoint header is not JSON: " + std::string(e.what()));
  }
  if (!header.contains("version")) throw Error(ErrorCode::Format, "checkpoint header lacks a version field");
  if (header["version"].get<int>() != kCheckpointVersion) {
    throw Error(ErrorCode::Format, "unsupported checkpoint version " + header["version"].dump());
  }
  const std::streamoff data_start = static_cast<std::streamoff>(sizeof(len) + len);
  for (auto& [name, t] : params) {
    const nlohmann::json* entry = nullptr;
    for (const auto& e : header["params"]) {
      if (e["name"] == name) entry = &e;
    }
    if (!entry) throw Error(ErrorCode::Format, "checkpoint " + path + " has no parameter '" + name + "'");
    const Shape shape = (*entry)["shape"].get<Shape>();
    if (shape != t.shape()) {
      throw Error(ErrorCode::ShapeMismatch, "checkpoint parameter '" + name + "' has shape " + shape_str(shape) +
                                                ", model expects " + shape_str(t.shape()));
    }
    const std::string dtype = (*entry)["dtype"].get<std::string>();
    in.seekg(data_start + static_cast<std::streamoff>((*entry)["byte_offset"].get<std::uint64_t>()));
    auto& values = t.values();
    if (dtype == "f64") {
      in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
    } else if (dtype == "f32") {
      std::vector<float> buf(values.size());
      in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
      std::copy(buf.begin(), buf.end(), values.begin());
    } else {
      throw Error(ErrorCode::Format, "unsupported dtype '" + dtype + "'");
    }
    if (!in) throw Error(ErrorCode::Format, "truncated checkpoint " + path);
  }
  return header["meta"].dump();
}

}  // namespace vocablab::ad
