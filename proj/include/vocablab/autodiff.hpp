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
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace vocablab::ad {

using Shape = std::vector<int>;

std::string shape_str(const Shape& shape);
std::size_t numel(const Shape& shape);

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  std::vector<double>& ensure_grad();
};

// Shared handle onto a graph node. Copies alias the same storage.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  int dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }

  std::vector<double>& values() { return node_->value; }
  const std::vector<double>& values() const { return node_->value; }
  // Gradient storage; zero-filled on first access.
  std::vector<double>& grad() { return node_->ensure_grad(); }
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad();

  bool requires_grad() const { return node_->requires_grad; }
  double item() const;
  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Topologically ordered records reachable from a loss.
class Graph {
 public:
  static Graph trace(const Tensor& loss);
  const std::vector<Node*>& order() const { return order_; }
  std::size_t size() const { return order_.size(); }
  // Seeds d(loss)/d(loss) = 1 and runs every backward rule in exact reverse order.
  void backward();

 private:
  std::vector<Node*> order_;
  Node* root_ = nullptr;
};

/// Populates .grad of every node reachable from `loss`. Throws NonScalarLoss
/// unless `loss` holds exactly one value.
void backward(const Tensor& loss);

// ---- primitives -----------------------------------------------------------

Tensor detach(const Tensor& x);

// x[M,in] * W[out,in]^T + b[out]; b may be undefined.
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b = {});
// x[N,C,H,W], w[O,C,k,k] with odd k, zero padding k/2, stride 1.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b = {});
Tensor max_pool2d(const Tensor& x, int window = 2);
Tensor adaptive_avg_pool2d(const Tensor& x, int out_h, int out_w);
// Half-pixel-centre bilinear interpolation of x[N,C,H,W].
Tensor bilinear_resize(const Tensor& x, int out_h, int out_w);

Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
// Over the last axis.
Tensor softmax(const Tensor& x);
Tensor log_softmax(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
// x[N,T,A] + y[N,A] (per-sample bias over the middle axis).
Tensor add_over_time(const Tensor& x, const Tensor& y);
// out[n,:] = sum_t alpha[n,t] * v[n,t,:]
Tensor weighted_sum(const Tensor& alpha, const Tensor& v);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor mean_axis(const Tensor& x, int axis);

Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& x, int axis, int begin, int end);
Tensor select(const Tensor& x, int axis, int index);
Tensor stack(const std::vector<Tensor>& parts, int axis);
Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<int>& perm);

// Rows of table[V,D] picked by index.
Tensor gather_rows(const Tensor& table, const std::vector<int>& index);

// sum_m weight[m] * -logp[m, target[m]]; rows with target < 0 are skipped.
Tensor nll(const Tensor& logp, const std::vector<int>& target, const std::vector<double>& weight);

// sum_m weight[m] * KL(q_m || softmax(logits_m)); q is a constant target,
// learner probabilities are floored at kKlFloor.
inline constexpr double kKlFloor = 1e-12;
Tensor kl_to_target(const Tensor& logits, const std::vector<double>& q, const std::vector<double>& weight);

// Mean over the batch of the CTC negative log-likelihood of logits[N,T,K].
Tensor ctc_loss(const Tensor& logits, const std::vector<std::vector<int>>& labels, int blank);

struct Region {
  int sample = 0;
  std::vector<std::pair<int, int>> cells;  // (row, col)
};
// Mean of x[N,C,H,W] over each region's cells -> [P,C]. Empty regions give zero rows.
Tensor region_mean(const Tensor& x, const std::vector<Region>& regions);

// ---- CTC dynamic programme (shared by the op and the plain API) -----------

struct CtcResult {
  double nll = 0.0;
  std::vector<double> grad;  // d nll / d logits, T x K
};
// Log-space forward-backward on one sequence of unnormalized logits (T x K).
CtcResult ctc_forward_backward(const double* logits, int frames, int classes, const std::vector<int>& label, int blank,
                               bool want_grad);
// Frames needed to emit `label` (length plus forced blanks between repeats).
int ctc_min_frames(const std::vector<int>& label);

// ---- gradient checking ------------------------------------------------------

/// Max over coordinates of |analytic - numeric| / max(1e-8, |analytic| + |numeric|)
/// using central differences.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const std::vector<double>& point, const Shape& shape,
                  double epsilon = 1e-5);

/// Same check against every parameter of a closed-over loss. When
/// `max_coords` is non-zero, that many coordinates per parameter are sampled.
double grad_check_params(const std::function<Tensor()>& loss_fn, const std::vector<Tensor>& params,
                         double epsilon = 1e-5, std::size_t max_coords = 0, std::uint64_t seed = 7);

// ---- optimisation -----------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 0.0;  // global gradient-norm clip; 0 disables
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  long step = 0;
};

/// One bias-corrected Adam update of `params` using their current .grad.
/// Parameters without a gradient are treated as having zero gradient.
/// Gradients are zeroed afterwards, ready for the next backward pass.
void adam_step(std::vector<Tensor>& params, AdamState& state, const AdamConfig& config);

// ---- checkpoints --------------------------------------------------------------

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

inline constexpr int kCheckpointVersion = 1;

/// Layout: 8-byte little-endian header length, JSON header
/// {version, meta, params:[{name, shape, dtype, byte_offset}]}, then raw
/// little-endian arrays.
void save_checkpoint(const std::string& path, const NamedTensors& params, const std::string& meta_json = "{}");
/// Loads into existing tensors by name; shapes must match.
std::string load_checkpoint(const std::string& path, NamedTensors& params);

}  // namespace vocablab::ad
