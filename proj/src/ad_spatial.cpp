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
#include <cmath>
#include <memory>

#include "ad_internal.hpp"
#include "vocablab/autodiff.hpp"
#include "vocablab/error.hpp"

namespace vocablab::ad {
namespace {

void require(bool ok, const char* op, const std::string& detail) {
  if (!ok) throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": " + detail);
}

void im2col(const double* img, int c, int h, int w, int k, double* cols) {
  const int pad = k / 2;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int ch = 0; ch < c; ++ch) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = cols + (static_cast<std::size_t>(ch * k + ky) * k + kx) * hw;
        const double* plane = img + static_cast<std::size_t>(ch) * hw;
        for (int y = 0; y < h; ++y) {
          const int iy = y + ky - pad;
          double* dst = row + static_cast<std::size_t>(y) * w;
          if (iy < 0 || iy >= h) {
            std::fill_n(dst, w, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(iy) * w;
          const int shift = kx - pad;
          for (int x = 0; x < w; ++x) {
            const int ix = x + shift;
            dst[x] = (ix >= 0 && ix < w) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* cols, int c, int h, int w, int k, double* img) {
  const int pad = k / 2;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int ch = 0; ch < c; ++ch) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = cols + (static_cast<std::size_t>(ch * k + ky) * k + kx) * hw;
        double* plane = img + static_cast<std::size_t>(ch) * hw;
        for (int y = 0; y < h; ++y) {
          const int iy = y + ky - pad;
          if (iy < 0 || iy >= h) continue;
          const double* src = row + static_cast<std::size_t>(y) * w;
          double* dst = plane + static_cast<std::size_t>(iy) * w;
          const int shift = kx - pad;
          const int x_lo = std::max(0, -shift), x_hi = std::min(w, w - shift);
          for (int x = x_lo; x < x_hi; ++x) dst[x + shift] += src[x];
        }
      }
    }
  }
}

// Linear interpolation taps along one axis with half-pixel centres.
struct Taps {
  std::vector<int> lo, hi;
  std::vector<double> frac;
};

Taps make_taps(int in, int out) {
  Taps t;
  t.lo.resize(static_cast<std::size_t>(out));
  t.hi.resize(static_cast<std::size_t>(out));
  t.frac.resize(static_cast<std::size_t>(out));
  const double ratio = static_cast<double>(in) / out;
  for (int i = 0; i < out; ++i) {
    double src = (i + 0.5) * ratio - 0.5;
    if (src < 0.0) src = 0.0;
    int lo = static_cast<int>(std::floor(src));
    if (lo > in - 1) lo = in - 1;
    const int hi = std::min(lo + 1, in - 1);
    t.lo[static_cast<std::size_t>(i)] = lo;
    t.hi[static_cast<std::size_t>(i)] = hi;
    t.frac[static_cast<std::size_t>(i)] = src - lo;
  }
  return t;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b) {
  require(x.rank() == 4 && w.rank() == 4 && x.dim(1) == w.dim(1) && w.dim(2) == w.dim(3) && w.dim(2) % 2 == 1, "conv2d",
          "input " + shape_str(x.shape()) + " vs weight " + shape_str(w.shape()));
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3), o = w.dim(0), k = w.dim(2);
  if (b.defined()) require(b.rank() == 1 && b.dim(0) == o, "conv2d", "bias " + shape_str(b.shape()) + " vs " + std::to_string(o) + " filters");
  const std::size_t hw = static_cast<std::size_t>(h) * wd;
  const std::size_t ckk = static_cast<std::size_t>(c) * k * k;
  // One image worth of columns, rebuilt in backward rather than stored for the batch.
  std::vector<double> cols(k == 1 ? 0 : ckk * hw);
  std::vector<double> out(static_cast<std::size_t>(n) * o * hw);
  detail::CMapM W(w.values().data(), o, static_cast<Eigen::Index>(ckk));
  for (int i = 0; i < n; ++i) {
    double* col = cols.data();
    const double* img = x.values().data() + static_cast<std::size_t>(i) * c * hw;
    detail::MapM Y(out.data() + static_cast<std::size_t>(i) * o * hw, o, static_cast<Eigen::Index>(hw));
    if (k == 1) {
      Y.noalias() = W * detail::CMapM(img, c, static_cast<Eigen::Index>(hw));
    } else {
      im2col(img, c, h, wd, k, col);
      Y.noalias() = W * detail::CMapM(col, static_cast<Eigen::Index>(ckk), static_cast<Eigen::Index>(hw));
    }
    if (b.defined()) {
      for (int f = 0; f < o; ++f) Y.row(f).array() += b.values()[static_cast<std::size_t>(f)];
    }
  }
  std::vector<Tensor> inputs{x, w};
  if (b.defined()) inputs.push_back(b);
  return detail::make_op("conv2d", {n, o, h, wd}, std::move(out), inputs, [=](Node& self) {
    Node& xn = *self.inputs[0];
    Node& wn = *self.inputs[1];
    const auto ehw = static_cast<Eigen::Index>(hw);
    const auto eckk = static_cast<Eigen::Index>(ckk);
    std::vector<double> dcol(k == 1 ? 0 : ckk * hw), col_buf(k == 1 ? 0 : ckk * hw);
    for (int i = 0; i < n; ++i) {
      detail::CMapM dY(self.grad.data() + static_cast<std::size_t>(i) * o * hw, o, ehw);
      const double* img = xn.value.data() + static_cast<std::size_t>(i) * c * hw;
      const double* col = img;
      if (k != 1 && wn.requires_grad) {
        im2col(img, c, h, wd, k, col_buf.data());
        col = col_buf.data();
      }
      if (wn.requires_grad) {
        detail::MapM dW(wn.ensure_grad().data(), o, eckk);
        dW.noalias() += dY * detail::CMapM(col, eckk, ehw).transpose();
      }
      if (xn.requires_grad) {
        double* dimg = xn.ensure_grad().data() + static_cast<std::size_t>(i) * c * hw;
        if (k == 1) {
          detail::MapM(dimg, c, ehw).noalias() += detail::CMapM(wn.value.data(), o, eckk).transpose() * dY;
        } else {
          detail::MapM(dcol.data(), eckk, ehw).noalias() = detail::CMapM(wn.value.data(), o, eckk).transpose() * dY;
          col2im_add(dcol.data(), c, h, wd, k, dimg);
        }
      }
      if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
        auto& db = self.inputs[2]->ensure_grad();
        for (int f = 0; f < o; ++f) db[static_cast<std::size_t>(f)] += dY.row(f).sum();
      }
    }
  });
}

Tensor max_pool2d(const Tensor& x, int window) {
  require(x.rank() == 4 && window >= 1 && x.dim(2) >= window && x.dim(3) >= window, "max_pool2d",
          "input " + shape_str(x.shape()) + " with window " + std::to_string(window));
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int oh = h / window, ow = w / window;
  std::vector<double> out(static_cast<std::size_t>(n) * c * oh * ow);
  std::vector<std::size_t> arg(out.size());
  for (int p = 0; p < n * c; ++p) {
    const std::size_t in_base = static_cast<std::size_t>(p) * h * w;
    for (int y = 0; y < oh; ++y) {
      for (int xx = 0; xx < ow; ++xx) {
        std::size_t best = in_base + static_cast<std::size_t>(y * window) * w + xx * window;
        for (int dy = 0; dy < window; ++dy)
          for (int dx = 0; dx < window; ++dx) {
            const std::size_t idx = in_base + static_cast<std::size_t>(y * window + dy) * w + xx * window + dx;
            if (x.values()[idx] > x.values()[best]) best = idx;
          }
        const std::size_t o = (static_cast<std::size_t>(p) * oh + y) * ow + xx;
        out[o] = x.values()[best];
        arg[o] = best;
      }
    }
  }
  return detail::make_op("max_pool2d", {n, c, oh, ow}, std::move(out), {x}, [arg = std::move(arg)](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.ensure_grad();
    for (std::size_t o = 0; o < arg.size(); ++o) g[arg[o]] += self.grad[o];
  });
}

Tensor adaptive_avg_pool2d(const Tensor& x, int out_h, int out_w) {
  require(x.rank() == 4 && out_h >= 1 && out_w >= 1, "adaptive_avg_pool2d",
          "input " + shape_str(x.shape()) + " to " + std::to_string(out_h) + "x" + std::to_string(out_w));
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  auto bins = [](int in, int out) {
    std::vector<std::pair<int, int>> b(static_cast<std::size_t>(out));
    for (int i = 0; i < out; ++i) b[static_cast<std::size_t>(i)] = {(i * in) / out, ((i + 1) * in + out - 1) / out};
    return b;
  };
  const auto by = bins(h, out_h), bx = bins(w, out_w);
  std::vector<double> out(static_cast<std::size_t>(n) * c * out_h * out_w);
  for (int p = 0; p < n * c; ++p) {
    const double* plane = x.values().data() + static_cast<std::size_t>(p) * h * w;
    for (int i = 0; i < out_h; ++i)
      for (int j = 0; j < out_w; ++j) {
        const auto [y0, y1] = by[static_cast<std::size_t>(i)];
        const auto [x0, x1] = bx[static_cast<std::size_t>(j)];
        double s = 0.0;
        for (int y = y0; y < y1; ++y)
          for (int xx = x0; xx < x1; ++xx) s += plane[static_cast<std::size_t>(y) * w + xx];
        out[(static_cast<std::size_t>(p) * out_h + i) * out_w + j] = s / ((y1 - y0) * (x1 - x0));
      }
  }
  return detail::make_op("adaptive_avg_pool2d", {n, c, out_h, out_w}, std::move(out), {x},
                         [n, c, h, w, out_h, out_w, by, bx](Node& self) {
                           Node& in = *self.inputs[0];
                           if (!in.requires_grad) return;
                           auto& g = in.ensure_grad();
                           for (int p = 0; p < n * c; ++p) {
                             double* plane = g.data() + static_cast<std::size_t>(p) * h * w;
                             for (int i = 0; i < out_h; ++i)
                               for (int j = 0; j < out_w; ++j) {
                                 const auto [y0, y1] = by[static_cast<std::size_t>(i)];
                                 const auto [x0, x1] = bx[static_cast<std::size_t>(j)];
                                 const double go = self.grad[(static_cast<std::size_t>(p) * out_h + i) * out_w + j] /
                                                   ((y1 - y0) * (x1 - x0));
                                 for (int y = y0; y < y1; ++y)
                                   for (int xx = x0; xx < x1; ++xx) plane[static_cast<std::size_t>(y) * w + xx] += go;
                               }
                           }
                         });
}

Tensor bilinear_resize(const Tensor& x, int out_h, int out_w) {
  require(x.rank() == 4 && out_h >= 1 && out_w >= 1, "bilinear_resize",
          "input " + shape_str(x.shape()) + " to " + std::to_string(out_h) + "x" + std::to_string(out_w));
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const Taps ty = make_taps(h, out_h), tx = make_taps(w, out_w);
  std::vector<double> out(static_cast<std::size_t>(n) * c * out_h * out_w);
  for (int p = 0; p < n * c; ++p) {
    const double* plane = x.values().data() + static_cast<std::size_t>(p) * h * w;
    for (int i = 0; i < out_h; ++i) {
      const double fy = ty.frac[static_cast<std::size_t>(i)];
      const double* r0 = plane + static_cast<std::size_t>(ty.lo[static_cast<std::size_t>(i)]) * w;
      const double* r1 = plane + static_cast<std::size_t>(ty.hi[static_cast<std::size_t>(i)]) * w;
      for (int j = 0; j < out_w; ++j) {
        const double fx = tx.frac[static_cast<std::size_t>(j)];
        const int x0 = tx.lo[static_cast<std::size_t>(j)], x1 = tx.hi[static_cast<std::size_t>(j)];
        const double top = r0[x0] * (1.0 - fx) + r0[x1] * fx;
        const double bot = r1[x0] * (1.0 - fx) + r1[x1] * fx;
        out[(static_cast<std::size_t>(p) * out_h + i) * out_w + j] = top * (1.0 - fy) + bot * fy;
      }
    }
  }
  return detail::make_op("bilinear_resize", {n, c, out_h, out_w}, std::move(out), {x},
                         [n, c, h, w, out_h, out_w, ty, tx](Node& self) {
                           Node& in = *self.inputs[0];
                           if (!in.requires_grad) return;
                           auto& g = in.ensure_grad();
                           for (int p = 0; p < n * c; ++p) {
                             double* plane = g.data() + static_cast<std::size_t>(p) * h * w;
                             for (int i = 0; i < out_h; ++i) {
                               const double fy = ty.frac[static_cast<std::size_t>(i)];
                               double* r0 = plane + static_cast<std::size_t>(ty.lo[static_cast<std::size_t>(i)]) * w;
                               double* r1 = plane + static_cast<std::size_t>(ty.hi[static_cast<std::size_t>(i)]) * w;
                               for (int j = 0; j < out_w; ++j) {
                                 const double fx = tx.frac[static_cast<std::size_t>(j)];
                                 const int x0 = tx.lo[static_cast<std::size_t>(j)], x1 = tx.hi[static_cast<std::size_t>(j)];
                                 const double go = self.grad[(static_cast<std::size_t>(p) * out_h + i) * out_w + j];
                                 r0[x0] += go * (1.0 - fy) * (1.0 - fx);
                                 r0[x1] += go * (1.0 - fy) * fx;
                                 r1[x0] += go * fy * (1.0 - fx);
                                 r1[x1] += go * fy * fx;
                               }
                             }
                           }
                         });
}

Tensor region_mean(const Tensor& x, const std::vector<Region>& regions) {
  require(x.rank() == 4, "region_mean", "input must be NCHW, got " + shape_str(x.shape()));
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (const auto& r : regions) {
    require(r.sample >= 0 && r.sample < n, "region_mean", "sample index " + std::to_string(r.sample) + " outside batch");
    for (const auto& [row, col] : r.cells) {
      require(row >= 0 && row < h && col >= 0 && col < w, "region_mean", "cell outside " + shape_str(x.shape()));
    }
  }
  const int p = static_cast<int>(regions.size());
  std::vector<double> out(static_cast<std::size_t>(p) * c, 0.0);
  for (int i = 0; i < p; ++i) {
    const auto& r = regions[static_cast<std::size_t>(i)];
    if (r.cells.empty()) continue;
    const double inv = 1.0 / static_cast<double>(r.cells.size());
    for (int ch = 0; ch < c; ++ch) {
      const double* plane = x.values().data() + (static_cast<std::size_t>(r.sample) * c + ch) * hw;
      double s = 0.0;
      for (const auto& [row, col] : r.cells) s += plane[static_cast<std::size_t>(row) * w + col];
      out[static_cast<std::size_t>(i) * c + ch] = s * inv;
    }
  }
  return detail::make_op("region_mean", {p, c}, std::move(out), {x}, [regions, c, hw, w](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.ensure_grad();
    for (std::size_t i = 0; i < regions.size(); ++i) {
      const auto& r = regions[i];
      if (r.cells.empty()) continue;
      const double inv = 1.0 / static_cast<double>(r.cells.size());
      for (int ch = 0; ch < c; ++ch) {
        double* plane = g.data() + (static_cast<std::size_t>(r.sample) * c + ch) * hw;
        const double go = self.grad[i * c + static_cast<std::size_t>(ch)] * inv;
        for (const auto& [row, col] : r.cells) plane[static_cast<std::size_t>(row) * w + col] += go;
      }
    }
  });
}

}  // namespace vocablab::ad
