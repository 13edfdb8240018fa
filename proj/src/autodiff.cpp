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

#include "vocablab/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <new>
#include <unordered_set>

#include <Eigen/Core>

#include "ad_internal.hpp"
#include "vocablab/error.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

// Eigen peels reductions and matrix-vector kernels up to the first aligned
// element, so summation order follows the buffer address. Giving every
// buffer of 256 bytes or more a 64-byte start makes results independent of
// where the allocator happens to place it, hence bitwise reproducible runs.
void* operator new(std::size_t n) {
  constexpr std::size_t kAlign = 64;
  void* p = n >= 256 ? std::aligned_alloc(kAlign, (n + kAlign - 1) & ~(kAlign - 1)) : std::malloc(n ? n : 1);
  if (!p) throw std::bad_alloc();
  return p;
}
void* operator new[](std::size_t n) { return ::operator new(n); }
void operator delete(void* p) noexcept { std::free(p); }
void operator delete[](void* p) noexcept { std::free(p); }
void operator delete(void* p, std::size_t) noexcept { std::free(p); }
void operator delete[](void* p, std::size_t) noexcept { std::free(p); }

namespace vocablab::ad {
namespace {

#if defined(__GLIBC__)
// Activations are allocated and freed every step; keeping them on the heap
// instead of fresh mmap pages avoids a page-fault storm per batch.
const bool g_heap_tuned = [] {
  mallopt(M_MMAP_THRESHOLD, 32 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
  return true;
}();
#endif

thread_local bool t_grad_enabled = true;

void require(bool ok, const char* op, const std::string& detail) {
  if (!ok) throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": " + detail);
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), op, "shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) + " differ");
}

int norm_axis(const char* op, int axis, std::size_t rank) {
  if (axis < 0) axis += static_cast<int>(rank);
  require(axis >= 0 && axis < static_cast<int>(rank), op, "axis out of range for rank " + std::to_string(rank));
  return axis;
}

// outer x axis x inner decomposition around `axis`.
struct AxisSplit {
  std::size_t outer = 1, axis = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, int axis) {
  AxisSplit r;
  for (int i = 0; i < axis; ++i) r.outer *= static_cast<std::size_t>(s[static_cast<std::size_t>(i)]);
  r.axis = static_cast<std::size_t>(s[static_cast<std::size_t>(axis)]);
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < s.size(); ++i) r.inner *= static_cast<std::size_t>(s[i]);
  return r;
}

template <typename Fwd, typename Deriv>
Tensor unary(const char* op, const Tensor& x, Fwd fwd, Deriv deriv) {
  std::vector<double> out(x.size());
  const auto& xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
  return detail::make_op(op, x.shape(), std::move(out), {x}, [deriv](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * deriv(in.value[i], self.value[i]);
  });
}

}  // namespace

namespace detail {

Tensor make_op(const char* op, Shape shape, std::vector<double> value, std::initializer_list<Tensor> inputs,
               std::function<void(Node&)> backward_fn) {
  return make_op(op, std::move(shape), std::move(value), std::vector<Tensor>(inputs), std::move(backward_fn));
}

Tensor make_op(const char* op, Shape shape, std::vector<double> value, const std::vector<Tensor>& inputs,
               std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
#ifndef NDEBUG
  for (double v : node->value) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidInput, std::string(op) + ": produced a non-finite value");
  }
#endif
  if (t_grad_enabled) {
    bool any = false;
    for (const auto& t : inputs) any = any || (t.defined() && t.requires_grad());
    if (any) {
      node->requires_grad = true;
      for (const auto& t : inputs) {
        if (t.defined()) node->inputs.push_back(t.shared());
      }
      node->backward_fn = std::move(backward_fn);
    }
  }
  return Tensor(std::move(node));
}

}  // namespace detail

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

std::vector<double>& Node::ensure_grad() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = numel(shape);
  return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (numel(shape) != values.size()) {
    throw Error(ErrorCode::ShapeMismatch, "tensor: " + std::to_string(values.size()) + " values for shape " + shape_str(shape));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double v, bool requires_grad) { return from({1}, {v}, requires_grad); }

void Tensor::zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

double Tensor::item() const {
  if (size() != 1) throw Error(ErrorCode::NonScalarLoss, "item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
bool grad_enabled() { return t_grad_enabled; }

Graph Graph::trace(const Tensor& loss) {
  Graph g;
  g.root_ = loss.node();
  if (!g.root_->requires_grad) return g;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{g.root_, 0}};
  seen.insert(g.root_);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      g.order_.push_back(node);
      stack.pop_back();
    }
  }
  return g;
}

void Graph::backward() {
  if (!root_ || !root_->requires_grad) return;
  root_->ensure_grad();
  root_->grad[0] += 1.0;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw Error(ErrorCode::NonScalarLoss,
                "backward: loss must be scalar, got shape " + (loss.defined() ? shape_str(loss.shape()) : "<undefined>"));
  }
  Graph::trace(loss).backward();
}

Tensor detach(const Tensor& x) { return Tensor::from(x.shape(), x.values(), false); }

// ---- dense ------------------------------------------------------------------

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  require(x.rank() == 2 && w.rank() == 2 && x.dim(1) == w.dim(1), "affine",
          "input " + shape_str(x.shape()) + " vs weight " + shape_str(w.shape()));
  const int m = x.dim(0), in = x.dim(1), out = w.dim(0);
  if (b.defined()) {
    require(b.rank() == 1 && b.dim(0) == out, "affine", "bias " + shape_str(b.shape()) + " vs weight " + shape_str(w.shape()));
  }
  std::vector<double> y(static_cast<std::size_t>(m) * out);
  detail::MapM Y(y.data(), m, out);
  detail::CMapM X(x.values().data(), m, in);
  detail::CMapM W(w.values().data(), out, in);
  Y.noalias() = X * W.transpose();
  if (b.defined()) {
    Eigen::Map<const Eigen::RowVectorXd> B(b.values().data(), out);
    Y.rowwise() += B;
  }
  std::vector<Tensor> inputs{x, w};
  if (b.defined()) inputs.push_back(b);
  return detail::make_op("affine", {m, out}, std::move(y), inputs, [m, in, out](Node& self) {
    detail::CMapM dY(self.grad.data(), m, out);
    Node& xn = *self.inputs[0];
    Node& wn = *self.inputs[1];
    if (xn.requires_grad) {
      detail::MapM dX(xn.ensure_grad().data(), m, in);
      dX.noalias() += dY * detail::CMapM(wn.value.data(), out, in);
    }
    if (wn.requires_grad) {
      detail::MapM dW(wn.ensure_grad().data(), out, in);
      dW.noalias() += dY.transpose() * detail::CMapM(xn.value.data(), m, in);
    }
    if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
      Eigen::Map<Eigen::RowVectorXd> dB(self.inputs[2]->ensure_grad().data(), out);
      dB += dY.colwise().sum();
    }
  });
}

// ---- elementwise ------------------------------------------------------------

Tensor relu(const Tensor& x) {
  return unary("relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& x) {
  return unary("tanh", x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary("sigmoid", x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
               [](double, double y) { return y * (1.0 - y); });
}

Tensor scale(const Tensor& x, double factor) {
  return unary("scale", x, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same("add", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  return detail::make_op("add", a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (int k = 0; k < 2; ++k) {
      Node& in = *self.inputs[static_cast<std::size_t>(k)];
      if (!in.requires_grad) continue;
      auto& g = in.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same("sub", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
  return detail::make_op("sub", a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (int k = 0; k < 2; ++k) {
      Node& in = *self.inputs[static_cast<std::size_t>(k)];
      if (!in.requires_grad) continue;
      const double sign = k == 0 ? 1.0 : -1.0;
      auto& g = in.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same("mul", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  return detail::make_op("mul", a.shape(), std::move(out), {a, b}, [](Node& self) {
    Node& an = *self.inputs[0];
    Node& bn = *self.inputs[1];
    if (an.requires_grad) {
      auto& g = an.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bn.value[i];
    }
    if (bn.requires_grad) {
      auto& g = bn.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * an.value[i];
    }
  });
}

Tensor add_over_time(const Tensor& x, const Tensor& y) {
  require(x.rank() == 3 && y.rank() == 2 && x.dim(0) == y.dim(0) && x.dim(2) == y.dim(1), "add_over_time",
          "sequence " + shape_str(x.shape()) + " vs bias " + shape_str(y.shape()));
  const int n = x.dim(0), t = x.dim(1), a = x.dim(2);
  std::vector<double> out(x.values());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < t; ++j)
      for (int k = 0; k < a; ++k) out[(static_cast<std::size_t>(i) * t + j) * a + k] += y.values()[static_cast<std::size_t>(i) * a + k];
  return detail::make_op("add_over_time", x.shape(), std::move(out), {x, y}, [n, t, a](Node& self) {
    Node& xn = *self.inputs[0];
    Node& yn = *self.inputs[1];
    if (xn.requires_grad) {
      auto& g = xn.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (yn.requires_grad) {
      auto& g = yn.ensure_grad();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < t; ++j)
          for (int k = 0; k < a; ++k) g[static_cast<std::size_t>(i) * a + k] += self.grad[(static_cast<std::size_t>(i) * t + j) * a + k];
    }
  });
}

Tensor weighted_sum(const Tensor& alpha, const Tensor& v) {
  require(alpha.rank() == 2 && v.rank() == 3 && alpha.dim(0) == v.dim(0) && alpha.dim(1) == v.dim(1), "weighted_sum",
          "weights " + shape_str(alpha.shape()) + " vs values " + shape_str(v.shape()));
  const int n = v.dim(0), t = v.dim(1), c = v.dim(2);
  std::vector<double> out(static_cast<std::size_t>(n) * c, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < t; ++j) {
      const double w = alpha.values()[static_cast<std::size_t>(i) * t + j];
      const double* row = v.values().data() + (static_cast<std::size_t>(i) * t + j) * c;
      double* o = out.data() + static_cast<std::size_t>(i) * c;
      for (int k = 0; k < c; ++k) o[k] += w * row[k];
    }
  return detail::make_op("weighted_sum", {n, c}, std::move(out), {alpha, v}, [n, t, c](Node& self) {
    Node& an = *self.inputs[0];
    Node& vn = *self.inputs[1];
    for (int i = 0; i < n; ++i) {
      const double* go = self.grad.data() + static_cast<std::size_t>(i) * c;
      for (int j = 0; j < t; ++j) {
        const std::size_t row = (static_cast<std::size_t>(i) * t + j) * c;
        if (an.requires_grad) {
          double acc = 0.0;
          for (int k = 0; k < c; ++k) acc += go[k] * vn.value[row + k];
          an.ensure_grad()[static_cast<std::size_t>(i) * t + j] += acc;
        }
        if (vn.requires_grad) {
          const double w = an.value[static_cast<std::size_t>(i) * t + j];
          auto& g = vn.ensure_grad();
          for (int k = 0; k < c; ++k) g[row + k] += w * go[k];
        }
      }
    }
  });
}

// ---- softmax family -----------------------------------------------------------

Tensor softmax(const Tensor& x) {
  require(x.rank() >= 1, "softmax", "needs at least one axis");
  const std::size_t k = static_cast<std::size_t>(x.shape().back());
  const std::size_t rows = x.size() / k;
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.values().data() + r * k;
    double* o = out.data() + r * k;
    const double mx = *std::max_element(in, in + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += (o[j] = std::exp(in[j] - mx));
    for (std::size_t j = 0; j < k; ++j) o[j] /= z;
  }
  return detail::make_op("softmax", x.shape(), std::move(out), {x}, [rows, k](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * k;
      const double* gy = self.grad.data() + r * k;
      double dot = 0.0;
      for (std::size_t j = 0; j < k; ++j) dot += gy[j] * y[j];
      for (std::size_t j = 0; j < k; ++j) g[r * k + j] += y[j] * (gy[j] - dot);
    }
  });
}

Tensor log_softmax(const Tensor& x) {
  require(x.rank() >= 1, "log_softmax", "needs at least one axis");
  const std::size_t k = static_cast<std::size_t>(x.shape().back());
  const std::size_t rows = x.size() / k;
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.values().data() + r * k;
    double* o = out.data() + r * k;
    const double mx = *std::max_element(in, in + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(in[j] - mx);
    const double lz = mx + std::log(z);
    for (std::size_t j = 0; j < k; ++j) o[j] = in[j] - lz;
  }
  return detail::make_op("log_softmax", x.shape(), std::move(out), {x}, [rows, k](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * k;
      const double* gy = self.grad.data() + r * k;
      double total = 0.0;
      for (std::size_t j = 0; j < k; ++j) total += gy[j];
      for (std::size_t j = 0; j < k; ++j) g[r * k + j] += gy[j] - std::exp(y[j]) * total;
    }
  });
}

// ---- reductions -------------------------------------------------------------

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return detail::make_op("sum", {1}, {s}, {x}, [](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.ensure_grad();
    for (auto& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  require(x.size() > 0, "mean", "empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor mean_axis(const Tensor& x, int axis) {
  axis = norm_axis("mean_axis", axis, x.rank());
  const AxisSplit s = split_at(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + axis);
  if (out_shape.empty()) out_shape = {1};
  std::vector<double> out(s.outer * s.inner, 0.0);
  const double inv = 1.0 / static_cast<double>(s.axis);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t a = 0; a < s.axis; ++a)
      for (std::size_t i = 0; i < s.inner; ++i) out[o * s.inner + i] += x.values()[(o * s.axis + a) * s.inner + i] * inv;
  return detail::make_op("mean_axis", out_shape, std::move(out), {x}, [s, inv](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.ensure_grad();
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t a = 0; a < s.axis; ++a)
        for (std::size_t i = 0; i < s.inner; ++i) g[(o * s.axis + a) * s.inner + i] += self.grad[o * s.inner + i] * inv;
  });
}

// ---- shape manipulation -----------------------------------------------------

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  require(!parts.empty(), "concat", "no inputs");
  axis = norm_axis("concat", axis, parts[0].rank());
  Shape out_shape = parts[0].shape();
  int total = 0;
  for (const auto& p : parts) {
    bool ok = p.rank() == out_shape.size();
    for (std::size_t d = 0; ok && d < out_shape.size(); ++d) {
      if (static_cast<int>(d) != axis && p.shape()[d] != out_shape[d]) ok = false;
    }
    require(ok, "concat", "part " + shape_str(p.shape()) + " incompatible with " + shape_str(out_shape) + " on axis " +
                              std::to_string(axis));
    total += p.shape()[static_cast<std::size_t>(axis)];
  }
  out_shape[static_cast<std::size_t>(axis)] = total;
  const AxisSplit os = split_at(out_shape, axis);
  std::vector<double> out(numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t chunk = static_cast<std::size_t>(p.shape()[static_cast<std::size_t>(axis)]) * os.inner;
    for (std::size_t o = 0; o < os.outer; ++o) {
      std::copy_n(p.values().data() + o * chunk, chunk, out.data() + o * os.axis * os.inner + offset);
    }
    offsets.push_back(offset);
    offset += chunk;
  }
  return detail::make_op("concat", out_shape, std::move(out), parts, [os, offsets](Node& self) {
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      Node& in = *self.inputs[k];
      if (!in.requires_grad) continue;
      auto& g = in.ensure_grad();
      const std::size_t chunk = g.size() / os.outer;
      for (std::size_t o = 0; o < os.outer; ++o) {
        const double* src = self.grad.data() + o * os.axis * os.inner + offsets[k];
        double* dst = g.data() + o * chunk;
        for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
      }
    }
  });
}

Tensor slice(const Tensor& x, int axis, int begin, int end) {
  axis = norm_axis("slice", axis, x.rank());
  const AxisSplit s = split_at(x.shape(), axis);
  require(begin >= 0 && begin < end && end <= static_cast<int>(s.axis), "slice",
          "range [" + std::to_string(begin) + "," + std::to_string(end) + ") outside " + shape_str(x.shape()));
  Shape out_shape = x.shape();
  out_shape[static_cast<std::size_t>(axis)] = end - begin;
  const std::size_t len = static_cast<std::size_t>(end - begin) * s.inner;
  const std::size_t start = static_cast<std::size_t>(begin) * s.inner;
  std::vector<double> out(s.outer * len);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(x.values().data() + o * s.axis * s.inner + start, len, out.data() + o * len);
  }
  return detail::make_op("slice", out_shape, std::move(out), {x}, [s, len, start](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.ensure_grad();
    for (std::size_t o = 0; o < s.outer; ++o) {
      double* dst = g.data() + o * s.axis * s.inner + start;
      const double* src = self.grad.data() + o * len;
      for (std::size_t i = 0; i < len; ++i) dst[i] += src[i];
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  require(numel(shape) == x.size(), "reshape", shape_str(x.shape()) + " -> " + shape_str(shape));
  return detail::make_op("reshape", std::move(shape), x.values(), {x}, [](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor select(const Tensor& x, int axis, int index) {
  axis = norm_axis("select", axis, x.rank());
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + axis);
  if (out_shape.empty()) out_shape = {1};
  return reshape(slice(x, axis, index, index + 1), out_shape);
}

Tensor stack(const std::vector<Tensor>& parts, int axis) {
  require(!parts.empty(), "stack", "no inputs");
  const int rank = static_cast<int>(parts[0].rank()) + 1;
  if (axis < 0) axis += rank;
  require(axis >= 0 && axis < rank, "stack", "axis out of range");
  std::vector<Tensor> expanded;
  expanded.reserve(parts.size());
  for (const auto& p : parts) {
    Shape s = p.shape();
    s.insert(s.begin() + axis, 1);
    expanded.push_back(reshape(p, s));
  }
  return concat(expanded, axis);
}

Tensor permute(const Tensor& x, const std::vector<int>& perm) {
  const std::size_t rank = x.rank();
  require(perm.size() == rank, "permute", "permutation length vs " + shape_str(x.shape()));
  std::vector<bool> used(rank, false);
  for (int p : perm) {
    require(p >= 0 && p < static_cast<int>(rank) && !used[static_cast<std::size_t>(p)], "permute", "invalid permutation");
    used[static_cast<std::size_t>(p)] = true;
  }
  Shape out_shape(rank);
  for (std::size_t d = 0; d < rank; ++d) out_shape[d] = x.shape()[static_cast<std::size_t>(perm[d])];
  std::vector<std::size_t> in_stride(rank, 1);
  for (std::size_t d = rank; d-- > 1;) in_stride[d - 1] = in_stride[d] * static_cast<std::size_t>(x.shape()[d]);
  // source offset of every output element
  std::vector<std::size_t> src(x.size());
  std::vector<int> idx(rank, 0);
  for (std::size_t o = 0; o < src.size(); ++o) {
    std::size_t off = 0;
    for (std::size_t d = 0; d < rank; ++d) off += static_cast<std::size_t>(idx[d]) * in_stride[static_cast<std::size_t>(perm[d])];
    src[o] = off;
    for (std::size_t d = rank; d-- > 0;) {
      if (++idx[d] < out_shape[d]) break;
      idx[d] = 0;
    }
  }
  std::vector<double> out(x.size());
  for (std::size_t o = 0; o < out.size(); ++o) out[o] = x.values()[src[o]];
  return detail::make_op("permute", out_shape, std::move(out), {x}, [src = std::move(src)](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.ensure_grad();
    for (std::size_t o = 0; o < src.size(); ++o) g[src[o]] += self.grad[o];
  });
}

Tensor gather_rows(const Tensor& table, const std::vector<int>& index) {
  require(table.rank() == 2, "gather_rows", "table must be 2-D, got " + shape_str(table.shape()));
  const int v = table.dim(0), d = table.dim(1);
  std::vector<double> out(index.size() * static_cast<std::size_t>(d));
  for (std::size_t m = 0; m < index.size(); ++m) {
    require(index[m] >= 0 && index[m] < v, "gather_rows", "index " + std::to_string(index[m]) + " outside table " + shape_str(table.shape()));
    std::copy_n(table.values().data() + static_cast<std::size_t>(index[m]) * d, d, out.data() + m * d);
  }
  return detail::make_op("gather_rows", {static_cast<int>(index.size()), d}, std::move(out), {table},
                         [index, d](Node& self) {
                           Node& in = *self.inputs[0];
                           if (!in.requires_grad) return;
                           auto& g = in.ensure_grad();
                           for (std::size_t m = 0; m < index.size(); ++m)
                             for (int k = 0; k < d; ++k) g[static_cast<std::size_t>(index[m]) * d + k] += self.grad[m * d + k];
                         });
}

// ---- losses -------------------------------------------------------------------

Tensor nll(const Tensor& logp, const std::vector<int>& target, const std::vector<double>& weight) {
  require(logp.rank() == 2 && target.size() == static_cast<std::size_t>(logp.dim(0)) && weight.size() == target.size(),
          "nll", "log-probs " + shape_str(logp.shape()) + " vs " + std::to_string(target.size()) + " targets");
  const int k = logp.dim(1);
  double total = 0.0;
  for (std::size_t m = 0; m < target.size(); ++m) {
    if (target[m] < 0) continue;
    require(target[m] < k, "nll", "target " + std::to_string(target[m]) + " outside " + std::to_string(k) + " classes");
    total -= weight[m] * logp.values()[m * k + target[m]];
  }
  return detail::make_op("nll", {1}, {total}, {logp}, [target, weight, k](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.ensure_grad();
    for (std::size_t m = 0; m < target.size(); ++m) {
      if (target[m] >= 0) g[m * k + target[m]] -= weight[m] * self.grad[0];
    }
  });
}

Tensor kl_to_target(const Tensor& logits, const std::vector<double>& q, const std::vector<double>& weight) {
  require(logits.rank() == 2 && q.size() == logits.size() && weight.size() == static_cast<std::size_t>(logits.dim(0)),
          "kl_to_target", "logits " + shape_str(logits.shape()) + " vs target of " + std::to_string(q.size()) + " values");
  const std::size_t rows = static_cast<std::size_t>(logits.dim(0)), k = static_cast<std::size_t>(logits.dim(1));
  const double log_floor = std::log(kKlFloor);
  std::vector<double> p(logits.size());
  std::vector<char> floored(logits.size(), 0);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* z = logits.values().data() + r * k;
    const double mx = *std::max_element(z, z + k);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(z[j] - mx);
    const double lz = mx + std::log(s);
    double kl = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      double lp = z[j] - lz;
      p[r * k + j] = std::exp(lp);
      if (lp < log_floor) {
        lp = log_floor;
        floored[r * k + j] = 1;
      }
      const double qj = q[r * k + j];
      if (qj > 0.0) kl += qj * (std::log(qj) - lp);
    }
    total += weight[r] * kl;
  }
  return detail::make_op("kl_to_target", {1}, {total}, {logits},
                         [q, weight, rows, k, p = std::move(p), floored = std::move(floored)](Node& self) {
                           Node& in = *self.inputs[0];
                           if (!in.requires_grad) return;
                           auto& g = in.ensure_grad();
                           for (std::size_t r = 0; r < rows; ++r) {
                             double qmass = 0.0;
                             for (std::size_t j = 0; j < k; ++j) {
                               if (!floored[r * k + j]) qmass += q[r * k + j];
                             }
                             const double w = weight[r] * self.grad[0];
                             for (std::size_t j = 0; j < k; ++j) {
                               const double qj = floored[r * k + j] ? 0.0 : q[r * k + j];
                               g[r * k + j] += w * (p[r * k + j] * qmass - qj);
                             }
                           }
                         });
}

}  // namespace vocablab::ad
