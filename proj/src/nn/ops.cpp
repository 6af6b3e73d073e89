// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#include "tmcast/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>

#include "tmcast/error.hpp"

namespace tmcast::nn {

namespace {

using i64 = std::int64_t;
using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

// C (m x n) (+)= op(A) (m x k) * op(B) (k x n), all row-major. A is stored
// (k x m) when trans_a, B is stored (n x k) when trans_b.
void gemm(bool trans_a, bool trans_b, i64 m, i64 n, i64 k, const double* a, const double* b,
          double* c, bool accumulate) {
  MapR cm(c, m, n);
  if (!accumulate) cm.setZero();
  if (m == 0 || n == 0 || k == 0) return;
  CMapR am(a, trans_a ? k : m, trans_a ? m : k);
  CMapR bm(b, trans_b ? n : k, trans_b ? k : n);
  if (!trans_a && !trans_b)
    cm.noalias() += am * bm;
  else if (trans_a && !trans_b)
    cm.noalias() += am.transpose() * bm;
  else if (!trans_a && trans_b)
    cm.noalias() += am * bm.transpose();
  else
    cm.noalias() += am.transpose() * bm.transpose();
}

const Tensor& in_value(const Node& self, std::size_t i) { return self.inputs[i]->value; }

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
}

void require_rank(const Var& x, int rank, const char* op) {
  if (x.value().rank() != rank)
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     to_string(x.shape()));
}

template <typename Fwd, typename Deriv>
Var unary(const Var& x, Fwd fwd, Deriv deriv) {
  Tensor out(x.shape());
  const double* xs = x.value().data();
  double* ys = out.data();
  for (i64 i = 0; i < out.size(); ++i) ys[i] = fwd(xs[i]);
  return make_node(std::move(out), {x}, [deriv](Node& self) {
    Tensor* gx = input_grad(self, 0);
    if (!gx) return;
    const double* xv = in_value(self, 0).data();
    const double* yv = self.value.data();
    const double* gy = self.grad.data();
    double* g = gx->data();
    for (i64 i = 0; i < self.value.size(); ++i) g[i] += gy[i] * deriv(xv[i], yv[i]);
  });
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  for (i64 i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k)
      if (Tensor* g = input_grad(self, k))
        for (i64 i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out(a.shape());
  for (i64 i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    if (Tensor* g = input_grad(self, 0))
      for (i64 i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    if (Tensor* g = input_grad(self, 1))
      for (i64 i = 0; i < g->size(); ++i) (*g)[i] -= self.grad[i];
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out(a.shape());
  for (i64 i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    const Tensor& av = in_value(self, 0);
    const Tensor& bv = in_value(self, 1);
    if (Tensor* g = input_grad(self, 0))
      for (i64 i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * bv[i];
    if (Tensor* g = input_grad(self, 1))
      for (i64 i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * av[i];
  });
}

Var scale(const Var& a, double s) {
  Tensor out(a.shape());
  for (i64 i = 0; i < out.size(); ++i) out[i] = a.value()[i] * s;
  return make_node(std::move(out), {a}, [s](Node& self) {
    if (Tensor* g = input_grad(self, 0))
      for (i64 i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * s;
  });
}

Var scale_by(const Var& x, const Var& s) {
  if (s.value().size() != 1) throw ShapeError("scale_by: scale must have one element");
  const double sv = s.value()[0];
  Tensor out(x.shape());
  for (i64 i = 0; i < out.size(); ++i) out[i] = x.value()[i] * sv;
  return make_node(std::move(out), {x, s}, [](Node& self) {
    const Tensor& xv = in_value(self, 0);
    const double sv = in_value(self, 1)[0];
    if (Tensor* g = input_grad(self, 0))
      for (i64 i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * sv;
    if (Tensor* g = input_grad(self, 1)) {
      double acc = 0.0;
      for (i64 i = 0; i < xv.size(); ++i) acc += self.grad[i] * xv[i];
      (*g)[0] += acc;
    }
  });
}

Var silu(const Var& x) {
  return unary(
      x, [](double v) { return v / (1.0 + std::exp(-v)); },
      [](double v, double) {
        const double s = 1.0 / (1.0 + std::exp(-v));
        return s * (1.0 + v * (1.0 - s));
      });
}

Var sigmoid(const Var& x) {
  return unary(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  require_rank(w, 2, "linear");
  const i64 in = w.dim(0);
  const i64 out_dim = w.dim(1);
  if (x.value().rank() < 1 || x.dim(-1) != in)
    throw ShapeError("linear: input " + to_string(x.shape()) + " incompatible with weight " +
                     to_string(w.shape()));
  if (b.defined() && (b.value().size() != out_dim))
    throw ShapeError("linear: bias size mismatch");
  const i64 rows = x.value().size() / in;
  Shape shape = x.shape();
  shape.back() = out_dim;
  Tensor out(shape);
  gemm(false, false, rows, out_dim, in, x.value().data(), w.value().data(), out.data(), false);
  if (b.defined())
    for (i64 r = 0; r < rows; ++r)
      for (i64 o = 0; o < out_dim; ++o) out[r * out_dim + o] += b.value()[o];
  std::vector<Var> inputs{x, w};
  if (b.defined()) inputs.push_back(b);
  return make_node(std::move(out), std::move(inputs), [rows, in, out_dim](Node& self) {
    const double* gy = self.grad.data();
    if (Tensor* gx = input_grad(self, 0))
      gemm(false, true, rows, in, out_dim, gy, in_value(self, 1).data(), gx->data(), true);
    if (Tensor* gw = input_grad(self, 1))
      gemm(true, false, in, out_dim, rows, in_value(self, 0).data(), gy, gw->data(), true);
    if (self.inputs.size() > 2)
      if (Tensor* gb = input_grad(self, 2))
        for (i64 r = 0; r < rows; ++r)
          for (i64 o = 0; o < out_dim; ++o) (*gb)[o] += gy[r * out_dim + o];
  });
}

Var bmm(const Var& a, const Var& b, bool trans_a, bool trans_b) {
  require_rank(a, 3, "bmm");
  require_rank(b, 3, "bmm");
  const i64 batch = a.dim(0);
  if (b.dim(0) != batch) throw ShapeError("bmm: batch mismatch");
  const i64 m = trans_a ? a.dim(2) : a.dim(1);
  const i64 k = trans_a ? a.dim(1) : a.dim(2);
  const i64 kb = trans_b ? b.dim(2) : b.dim(1);
  const i64 n = trans_b ? b.dim(1) : b.dim(2);
  if (k != kb)
    throw ShapeError("bmm: inner dimension mismatch " + to_string(a.shape()) + " x " +
                     to_string(b.shape()));
  Tensor out({batch, m, n});
  for (i64 i = 0; i < batch; ++i)
    gemm(trans_a, trans_b, m, n, k, a.value().data() + i * m * k,
         b.value().data() + i * k * n, out.data() + i * m * n, false);
  return make_node(std::move(out), {a, b}, [=](Node& self) {
    const double* av = in_value(self, 0).data();
    const double* bv = in_value(self, 1).data();
    const double* gc = self.grad.data();
    Tensor* ga = input_grad(self, 0);
    Tensor* gb = input_grad(self, 1);
    for (i64 i = 0; i < batch; ++i) {
      const double* ai = av + i * m * k;
      const double* bi = bv + i * k * n;
      const double* ci = gc + i * m * n;
      if (ga) {
        double* gai = ga->data() + i * m * k;
        if (!trans_a)
          gemm(false, !trans_b, m, k, n, ci, bi, gai, true);
        else
          gemm(trans_b, true, k, m, n, bi, ci, gai, true);
      }
      if (gb) {
        double* gbi = gb->data() + i * k * n;
        if (!trans_b)
          gemm(!trans_a, false, k, n, m, ai, ci, gbi, true);
        else
          gemm(true, trans_a, n, k, m, ci, ai, gbi, true);
      }
    }
  });
}

Var softmax(const Var& x, bool causal) {
  const i64 cols = x.dim(-1);
  const i64 rows = x.value().size() / cols;
  i64 queries = 0;
  if (causal) {
    if (x.value().rank() < 2 || x.dim(-2) != cols)
      throw ShapeError("softmax: causal mask needs square trailing dims, got " +
                       to_string(x.shape()));
    queries = x.dim(-2);
  }
  Tensor out(x.shape());
  const double* xv = x.value().data();
  for (i64 r = 0; r < rows; ++r) {
    const i64 limit = causal ? (r % queries) + 1 : cols;
    const double* xr = xv + r * cols;
    double* yr = out.data() + r * cols;
    double mx = -std::numeric_limits<double>::infinity();
    for (i64 c = 0; c < limit; ++c) mx = std::max(mx, xr[c]);
    double total = 0.0;
    for (i64 c = 0; c < limit; ++c) {
      yr[c] = std::exp(xr[c] - mx);
      total += yr[c];
    }
    for (i64 c = 0; c < limit; ++c) yr[c] /= total;
    for (i64 c = limit; c < cols; ++c) yr[c] = 0.0;
  }
  return make_node(std::move(out), {x}, [rows, cols](Node& self) {
    Tensor* gx = input_grad(self, 0);
    if (!gx) return;
    for (i64 r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * cols;
      const double* gy = self.grad.data() + r * cols;
      double dot = 0.0;
      for (i64 c = 0; c < cols; ++c) dot += gy[c] * y[c];
      double* g = gx->data() + r * cols;
      for (i64 c = 0; c < cols; ++c) g[c] += y[c] * (gy[c] - dot);
    }
  });
}

namespace {

// Normalized values and per-group inverse std, kept for the backward pass.
struct NormStats {
  std::vector<double> xhat;
  std::vector<double> inv_std;
};

}  // namespace

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const i64 d = x.dim(-1);
  const i64 rows = x.value().size() / d;
  if (gamma.defined() && gamma.value().size() != d) throw ShapeError("layer_norm: gamma size");
  if (beta.defined() && beta.value().size() != d) throw ShapeError("layer_norm: beta size");
  auto stats = std::make_shared<NormStats>();
  stats->xhat.resize(static_cast<std::size_t>(x.value().size()));
  stats->inv_std.resize(static_cast<std::size_t>(rows));
  Tensor out(x.shape());
  const double* xv = x.value().data();
  for (i64 r = 0; r < rows; ++r) {
    const double* xr = xv + r * d;
    double mu = 0.0;
    for (i64 c = 0; c < d; ++c) mu += xr[c];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (i64 c = 0; c < d; ++c) var += (xr[c] - mu) * (xr[c] - mu);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    stats->inv_std[r] = inv;
    for (i64 c = 0; c < d; ++c) {
      const double xh = (xr[c] - mu) * inv;
      stats->xhat[r * d + c] = xh;
      double y = xh;
      if (gamma.defined()) y *= gamma.value()[c];
      if (beta.defined()) y += beta.value()[c];
      out[r * d + c] = y;
    }
  }
  const bool has_gamma = gamma.defined();
  const bool has_beta = beta.defined();
  std::vector<Var> inputs{x};
  if (has_gamma) inputs.push_back(gamma);
  if (has_beta) inputs.push_back(beta);
  return make_node(std::move(out), std::move(inputs),
                   [stats, rows, d, has_gamma, has_beta](Node& self) {
                     const double* gy = self.grad.data();
                     const double* gam = has_gamma ? in_value(self, 1).data() : nullptr;
                     Tensor* gx = input_grad(self, 0);
                     Tensor* gg = has_gamma ? input_grad(self, 1) : nullptr;
                     Tensor* gbeta = has_beta ? input_grad(self, has_gamma ? 2 : 1) : nullptr;
                     std::vector<double> dxh(static_cast<std::size_t>(d));
                     for (i64 r = 0; r < rows; ++r) {
                       double mean_d = 0.0, mean_dx = 0.0;
                       for (i64 c = 0; c < d; ++c) {
                         const i64 i = r * d + c;
                         const double xh = stats->xhat[i];
                         if (gg) (*gg)[c] += gy[i] * xh;
                         if (gbeta) (*gbeta)[c] += gy[i];
                         dxh[c] = gam ? gy[i] * gam[c] : gy[i];
                         mean_d += dxh[c];
                         mean_dx += dxh[c] * xh;
                       }
                       if (!gx) continue;
                       mean_d /= static_cast<double>(d);
                       mean_dx /= static_cast<double>(d);
                       const double inv = stats->inv_std[r];
                       for (i64 c = 0; c < d; ++c) {
                         const i64 i = r * d + c;
                         (*gx)[i] += inv * (dxh[c] - mean_d - stats->xhat[i] * mean_dx);
                       }
                     }
                   });
}

Var group_norm(const Var& x, int groups, double eps) {
  if (x.value().rank() < 2) throw ShapeError("group_norm: rank < 2");
  const i64 batch = x.dim(0);
  const i64 channels = x.dim(1);
  if (groups <= 0 || channels % groups != 0)
    throw ShapeError("group_norm: " + std::to_string(channels) + " channels not divisible by " +
                     std::to_string(groups) + " groups");
  // Channels are contiguous blocks in (B, C, ...) so each group is contiguous.
  const i64 len = x.value().size() / (batch * groups);
  const i64 count = batch * groups;
  auto stats = std::make_shared<NormStats>();
  stats->xhat.resize(static_cast<std::size_t>(x.value().size()));
  stats->inv_std.resize(static_cast<std::size_t>(count));
  Tensor out(x.shape());
  const double* xv = x.value().data();
  for (i64 g = 0; g < count; ++g) {
    const double* xr = xv + g * len;
    double mu = 0.0;
    for (i64 i = 0; i < len; ++i) mu += xr[i];
    mu /= static_cast<double>(len);
    double var = 0.0;
    for (i64 i = 0; i < len; ++i) var += (xr[i] - mu) * (xr[i] - mu);
    var /= static_cast<double>(len);
    const double inv = 1.0 / std::sqrt(var + eps);
    stats->inv_std[g] = inv;
    for (i64 i = 0; i < len; ++i) {
      const double xh = (xr[i] - mu) * inv;
      stats->xhat[g * len + i] = xh;
      out[g * len + i] = xh;
    }
  }
  return make_node(std::move(out), {x}, [stats, count, len](Node& self) {
    Tensor* gx = input_grad(self, 0);
    if (!gx) return;
    const double* gy = self.grad.data();
    for (i64 g = 0; g < count; ++g) {
      double mean_d = 0.0, mean_dx = 0.0;
      for (i64 i = 0; i < len; ++i) {
        mean_d += gy[g * len + i];
        mean_dx += gy[g * len + i] * stats->xhat[g * len + i];
      }
      mean_d /= static_cast<double>(len);
      mean_dx /= static_cast<double>(len);
      const double inv = stats->inv_std[g];
      for (i64 i = 0; i < len; ++i) {
        const i64 j = g * len + i;
        (*gx)[j] += inv * (gy[j] - mean_d - stats->xhat[j] * mean_dx);
      }
    }
  });
}

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int padding) {
  require_rank(x, 4, "conv2d");
  require_rank(w, 4, "conv2d");
  const i64 batch = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const i64 cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != cin)
    throw ShapeError("conv2d: input channels " + std::to_string(cin) + " vs weight " +
                     to_string(w.shape()));
  if (b.defined() && b.value().size() != cout) throw ShapeError("conv2d: bias size");
  const i64 oh = (h + 2 * padding - kh) / stride + 1;
  const i64 ow = (wd + 2 * padding - kw) / stride + 1;
  if (oh <= 0 || ow <= 0) throw ShapeError("conv2d: kernel larger than padded input");
  const i64 ckk = cin * kh * kw;
  const i64 hw = oh * ow;
  const i64 ncols = batch * hw;

  // cols: (C*k*k) x (B*OH*OW)
  auto cols = std::make_shared<std::vector<double>>(static_cast<std::size_t>(ckk * ncols), 0.0);
  const double* xv = x.value().data();
  for (i64 n = 0; n < batch; ++n)
    for (i64 c = 0; c < cin; ++c)
      for (i64 ky = 0; ky < kh; ++ky)
        for (i64 kx = 0; kx < kw; ++kx) {
          const i64 row = (c * kh + ky) * kw + kx;
          double* dst = cols->data() + row * ncols + n * hw;
          const double* src = xv + (n * cin + c) * h * wd;
          for (i64 oy = 0; oy < oh; ++oy) {
            const i64 iy = oy * stride - padding + ky;
            if (iy < 0 || iy >= h) continue;
            for (i64 ox = 0; ox < ow; ++ox) {
              const i64 ix = ox * stride - padding + kx;
              if (ix >= 0 && ix < wd) dst[oy * ow + ox] = src[iy * wd + ix];
            }
          }
        }
  std::vector<double> tmp(static_cast<std::size_t>(cout * ncols));
  gemm(false, false, cout, ncols, ckk, w.value().data(), cols->data(), tmp.data(), false);
  Tensor out({batch, cout, oh, ow});
  for (i64 n = 0; n < batch; ++n)
    for (i64 o = 0; o < cout; ++o) {
      const double bias = b.defined() ? b.value()[o] : 0.0;
      const double* src = tmp.data() + o * ncols + n * hw;
      double* dst = out.data() + (n * cout + o) * hw;
      for (i64 i = 0; i < hw; ++i) dst[i] = src[i] + bias;
    }
  std::vector<Var> inputs{x, w};
  if (b.defined()) inputs.push_back(b);
  return make_node(std::move(out), std::move(inputs), [=](Node& self) {
    std::vector<double> gtmp(static_cast<std::size_t>(cout * ncols));
    const double* gy = self.grad.data();
    for (i64 n = 0; n < batch; ++n)
      for (i64 o = 0; o < cout; ++o)
        std::copy_n(gy + (n * cout + o) * hw, hw, gtmp.data() + o * ncols + n * hw);
    if (Tensor* gw = input_grad(self, 1))
      gemm(false, true, cout, ckk, ncols, gtmp.data(), cols->data(), gw->data(), true);
    if (self.inputs.size() > 2)
      if (Tensor* gb = input_grad(self, 2))
        for (i64 o = 0; o < cout; ++o) {
          double acc = 0.0;
          for (i64 i = 0; i < ncols; ++i) acc += gtmp[o * ncols + i];
          (*gb)[o] += acc;
        }
    if (Tensor* gx = input_grad(self, 0)) {
      std::vector<double> gcols(static_cast<std::size_t>(ckk * ncols));
      gemm(true, false, ckk, ncols, cout, in_value(self, 1).data(), gtmp.data(), gcols.data(),
           false);
      for (i64 n = 0; n < batch; ++n)
        for (i64 c = 0; c < cin; ++c)
          for (i64 ky = 0; ky < kh; ++ky)
            for (i64 kx = 0; kx < kw; ++kx) {
              const i64 row = (c * kh + ky) * kw + kx;
              const double* src = gcols.data() + row * ncols + n * hw;
              double* dst = gx->data() + (n * cin + c) * h * wd;
              for (i64 oy = 0; oy < oh; ++oy) {
                const i64 iy = oy * stride - padding + ky;
                if (iy < 0 || iy >= h) continue;
                for (i64 ox = 0; ox < ow; ++ox) {
                  const i64 ix = ox * stride - padding + kx;
                  if (ix >= 0 && ix < wd) dst[iy * wd + ix] += src[oy * ow + ox];
                }
              }
            }
    }
  });
}

Var conv1d_time(const Var& x, const Var& w, const Var& b) {
  require_rank(x, 3, "conv1d_time");
  require_rank(w, 3, "conv1d_time");
  const i64 batch = x.dim(0), steps = x.dim(1), cin = x.dim(2);
  const i64 cout = w.dim(0), k = w.dim(2);
  if (w.dim(1) != cin) throw ShapeError("conv1d_time: channel mismatch");
  if (k % 2 == 0) throw ShapeError("conv1d_time: kernel size must be odd");
  if (b.defined() && b.value().size() != cout) throw ShapeError("conv1d_time: bias size");
  const i64 pad = k / 2;
  const i64 rows = batch * steps;
  const i64 ck = cin * k;
  auto cols = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows * ck), 0.0);
  const double* xv = x.value().data();
  for (i64 n = 0; n < batch; ++n)
    for (i64 t = 0; t < steps; ++t)
      for (i64 c = 0; c < cin; ++c)
        for (i64 j = 0; j < k; ++j) {
          const i64 s = t + j - pad;
          if (s >= 0 && s < steps)
            (*cols)[(n * steps + t) * ck + c * k + j] = xv[(n * steps + s) * cin + c];
        }
  Tensor out({batch, steps, cout});
  // w viewed as (cout, cin*k): out = cols * w^T
  gemm(false, true, rows, cout, ck, cols->data(), w.value().data(), out.data(), false);
  if (b.defined())
    for (i64 r = 0; r < rows; ++r)
      for (i64 o = 0; o < cout; ++o) out[r * cout + o] += b.value()[o];
  std::vector<Var> inputs{x, w};
  if (b.defined()) inputs.push_back(b);
  return make_node(std::move(out), std::move(inputs), [=](Node& self) {
    const double* gy = self.grad.data();
    if (Tensor* gw = input_grad(self, 1))
      gemm(true, false, cout, ck, rows, gy, cols->data(), gw->data(), true);
    if (self.inputs.size() > 2)
      if (Tensor* gb = input_grad(self, 2))
        for (i64 r = 0; r < rows; ++r)
          for (i64 o = 0; o < cout; ++o) (*gb)[o] += gy[r * cout + o];
    if (Tensor* gx = input_grad(self, 0)) {
      std::vector<double> gcols(static_cast<std::size_t>(rows * ck));
      gemm(false, false, rows, ck, cout, gy, in_value(self, 1).data(), gcols.data(), false);
      for (i64 n = 0; n < batch; ++n)
        for (i64 t = 0; t < steps; ++t)
          for (i64 c = 0; c < cin; ++c)
            for (i64 j = 0; j < k; ++j) {
              const i64 s = t + j - pad;
              if (s >= 0 && s < steps)
                (*gx)[(n * steps + s) * cin + c] += gcols[(n * steps + t) * ck + c * k + j];
            }
    }
  });
}

Var channel_affine(const Var& x, const Var& scale_v, const Var& shift) {
  if (x.value().rank() < 2) throw ShapeError("channel_affine: rank < 2");
  const i64 batch = x.dim(0), channels = x.dim(1);
  const i64 inner = x.value().size() / (batch * channels);
  const Shape expect{batch, channels};
  if (scale_v.defined() && scale_v.shape() != expect)
    throw ShapeError("channel_affine: scale must be " + to_string(expect) + ", got " +
                     to_string(scale_v.shape()));
  if (shift.defined() && shift.shape() != expect)
    throw ShapeError("channel_affine: shift must be " + to_string(expect) + ", got " +
                     to_string(shift.shape()));
  Tensor out(x.shape());
  for (i64 bc = 0; bc < batch * channels; ++bc) {
    const double s = scale_v.defined() ? scale_v.value()[bc] : 1.0;
    const double t = shift.defined() ? shift.value()[bc] : 0.0;
    for (i64 i = 0; i < inner; ++i) out[bc * inner + i] = x.value()[bc * inner + i] * s + t;
  }
  const bool has_scale = scale_v.defined();
  const bool has_shift = shift.defined();
  std::vector<Var> inputs{x};
  if (has_scale) inputs.push_back(scale_v);
  if (has_shift) inputs.push_back(shift);
  return make_node(std::move(out), std::move(inputs), [=](Node& self) {
    const double* gy = self.grad.data();
    const double* xv = in_value(self, 0).data();
    const double* sv = has_scale ? in_value(self, 1).data() : nullptr;
    Tensor* gx = input_grad(self, 0);
    Tensor* gs = has_scale ? input_grad(self, 1) : nullptr;
    Tensor* gt = has_shift ? input_grad(self, has_scale ? 2 : 1) : nullptr;
    for (i64 bc = 0; bc < batch * channels; ++bc) {
      const double s = sv ? sv[bc] : 1.0;
      double acc_s = 0.0, acc_t = 0.0;
      for (i64 i = 0; i < inner; ++i) {
        const i64 j = bc * inner + i;
        if (gx) (*gx)[j] += gy[j] * s;
        acc_s += gy[j] * xv[j];
        acc_t += gy[j];
      }
      if (gs) (*gs)[bc] += acc_s;
      if (gt) (*gt)[bc] += acc_t;
    }
  });
}

Var spatial_gate(const Var& x, const Var& gate) {
  require_rank(x, 4, "spatial_gate");
  const i64 batch = x.dim(0), channels = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (gate.shape() != Shape{batch, 1, x.dim(2), x.dim(3)})
    throw ShapeError("spatial_gate: gate shape " + to_string(gate.shape()));
  Tensor out(x.shape());
  for (i64 n = 0; n < batch; ++n)
    for (i64 c = 0; c < channels; ++c)
      for (i64 i = 0; i < hw; ++i)
        out[(n * channels + c) * hw + i] =
            x.value()[(n * channels + c) * hw + i] * gate.value()[n * hw + i];
  return make_node(std::move(out), {x, gate}, [=](Node& self) {
    const double* gy = self.grad.data();
    const double* xv = in_value(self, 0).data();
    const double* gv = in_value(self, 1).data();
    Tensor* gx = input_grad(self, 0);
    Tensor* gg = input_grad(self, 1);
    for (i64 n = 0; n < batch; ++n)
      for (i64 c = 0; c < channels; ++c)
        for (i64 i = 0; i < hw; ++i) {
          const i64 j = (n * channels + c) * hw + i;
          if (gx) (*gx)[j] += gy[j] * gv[n * hw + i];
          if (gg) (*gg)[n * hw + i] += gy[j] * xv[j];
        }
  });
}

Var broadcast_batch(const Var& p, std::int64_t batch) {
  Shape shape{batch};
  shape.insert(shape.end(), p.shape().begin(), p.shape().end());
  const i64 n = p.value().size();
  Tensor out(shape);
  for (i64 b = 0; b < batch; ++b) std::copy_n(p.value().data(), n, out.data() + b * n);
  return make_node(std::move(out), {p}, [batch, n](Node& self) {
    Tensor* g = input_grad(self, 0);
    if (!g) return;
    for (i64 b = 0; b < batch; ++b)
      for (i64 i = 0; i < n; ++i) (*g)[i] += self.grad[b * n + i];
  });
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return make_node(std::move(out), {x}, [](Node& self) {
    if (Tensor* g = input_grad(self, 0))
      for (i64 i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
  });
}

Var permute(const Var& x, const std::vector<int>& perm) {
  const int r = x.value().rank();
  if (static_cast<int>(perm.size()) != r || r > 4)
    throw ShapeError("permute: bad permutation for " + to_string(x.shape()));
  // Pad to rank 4 with leading unit dims.
  std::array<i64, 4> in_dims{1, 1, 1, 1};
  std::array<int, 4> p{0, 1, 2, 3};
  const int off = 4 - r;
  for (int i = 0; i < r; ++i) {
    in_dims[off + i] = x.dim(i);
    p[off + i] = perm[i] + off;
  }
  std::array<i64, 4> in_strides{};
  in_strides[3] = 1;
  for (int i = 2; i >= 0; --i) in_strides[i] = in_strides[i + 1] * in_dims[i + 1];
  std::array<i64, 4> out_dims{}, src_stride{};
  for (int i = 0; i < 4; ++i) {
    out_dims[i] = in_dims[p[i]];
    src_stride[i] = in_strides[p[i]];
  }
  Shape out_shape;
  for (int i = 0; i < r; ++i) out_shape.push_back(out_dims[off + i]);
  Tensor out(out_shape);
  auto index_map = std::make_shared<std::vector<i64>>(static_cast<std::size_t>(out.size()));
  i64 o = 0;
  for (i64 a = 0; a < out_dims[0]; ++a)
    for (i64 b = 0; b < out_dims[1]; ++b)
      for (i64 c = 0; c < out_dims[2]; ++c)
        for (i64 d = 0; d < out_dims[3]; ++d) {
          const i64 src = a * src_stride[0] + b * src_stride[1] + c * src_stride[2] +
                          d * src_stride[3];
          (*index_map)[o] = src;
          out[o++] = x.value()[src];
        }
  return make_node(std::move(out), {x}, [index_map](Node& self) {
    Tensor* g = input_grad(self, 0);
    if (!g) return;
    for (std::size_t i = 0; i < index_map->size(); ++i)
      (*g)[(*index_map)[i]] += self.grad[static_cast<i64>(i)];
  });
}

Var concat_channels(const Var& a, const Var& b) {
  if (a.value().rank() < 2 || a.value().rank() != b.value().rank() || a.dim(0) != b.dim(0))
    throw ShapeError("concat_channels: incompatible " + to_string(a.shape()) + " and " +
                     to_string(b.shape()));
  for (int i = 2; i < a.value().rank(); ++i)
    if (a.dim(i) != b.dim(i)) throw ShapeError("concat_channels: trailing dims differ");
  const i64 batch = a.dim(0);
  const i64 na = a.value().size() / batch;
  const i64 nb = b.value().size() / batch;
  Shape shape = a.shape();
  shape[1] += b.dim(1);
  Tensor out(shape);
  for (i64 n = 0; n < batch; ++n) {
    std::copy_n(a.value().data() + n * na, na, out.data() + n * (na + nb));
    std::copy_n(b.value().data() + n * nb, nb, out.data() + n * (na + nb) + na);
  }
  return make_node(std::move(out), {a, b}, [batch, na, nb](Node& self) {
    Tensor* ga = input_grad(self, 0);
    Tensor* gb = input_grad(self, 1);
    for (i64 n = 0; n < batch; ++n) {
      const double* src = self.grad.data() + n * (na + nb);
      if (ga)
        for (i64 i = 0; i < na; ++i) (*ga)[n * na + i] += src[i];
      if (gb)
        for (i64 i = 0; i < nb; ++i) (*gb)[n * nb + i] += src[na + i];
    }
  });
}

Var pad2d(const Var& x, int top, int bottom, int left, int right) {
  require_rank(x, 4, "pad2d");
  if (top < 0 || bottom < 0 || left < 0 || right < 0) throw ShapeError("pad2d: negative pad");
  const i64 planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  const i64 oh = h + top + bottom, ow = w + left + right;
  Tensor out({x.dim(0), x.dim(1), oh, ow});
  for (i64 p = 0; p < planes; ++p)
    for (i64 y = 0; y < h; ++y)
      std::copy_n(x.value().data() + (p * h + y) * w, w,
                  out.data() + (p * oh + y + top) * ow + left);
  return make_node(std::move(out), {x}, [=](Node& self) {
    Tensor* g = input_grad(self, 0);
    if (!g) return;
    for (i64 p = 0; p < planes; ++p)
      for (i64 y = 0; y < h; ++y)
        for (i64 xx = 0; xx < w; ++xx)
          (*g)[(p * h + y) * w + xx] += self.grad[(p * oh + y + top) * ow + left + xx];
  });
}

Var crop2d(const Var& x, int top, int left, std::int64_t height, std::int64_t width) {
  require_rank(x, 4, "crop2d");
  const i64 planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  if (top < 0 || left < 0 || top + height > h || left + width > w)
    throw ShapeError("crop2d: window outside input");
  Tensor out({x.dim(0), x.dim(1), height, width});
  for (i64 p = 0; p < planes; ++p)
    for (i64 y = 0; y < height; ++y)
      std::copy_n(x.value().data() + (p * h + y + top) * w + left, width,
                  out.data() + (p * height + y) * width);
  return make_node(std::move(out), {x}, [=](Node& self) {
    Tensor* g = input_grad(self, 0);
    if (!g) return;
    for (i64 p = 0; p < planes; ++p)
      for (i64 y = 0; y < height; ++y)
        for (i64 xx = 0; xx < width; ++xx)
          (*g)[(p * h + y + top) * w + left + xx] += self.grad[(p * height + y) * width + xx];
  });
}

Var upsample_nearest2x(const Var& x) {
  require_rank(x, 4, "upsample_nearest2x");
  const i64 planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor out({x.dim(0), x.dim(1), 2 * h, 2 * w});
  for (i64 p = 0; p < planes; ++p)
    for (i64 y = 0; y < 2 * h; ++y)
      for (i64 xx = 0; xx < 2 * w; ++xx)
        out[(p * 2 * h + y) * 2 * w + xx] = x.value()[(p * h + y / 2) * w + xx / 2];
  return make_node(std::move(out), {x}, [=](Node& self) {
    Tensor* g = input_grad(self, 0);
    if (!g) return;
    for (i64 p = 0; p < planes; ++p)
      for (i64 y = 0; y < 2 * h; ++y)
        for (i64 xx = 0; xx < 2 * w; ++xx)
          (*g)[(p * h + y / 2) * w + xx / 2] += self.grad[(p * 2 * h + y) * 2 * w + xx];
  });
}

Var mean_spatial(const Var& x) {
  require_rank(x, 4, "mean_spatial");
  const i64 planes = x.dim(0) * x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor out({x.dim(0), x.dim(1)});
  for (i64 p = 0; p < planes; ++p) {
    double acc = 0.0;
    for (i64 i = 0; i < hw; ++i) acc += x.value()[p * hw + i];
    out[p] = acc / static_cast<double>(hw);
  }
  return make_node(std::move(out), {x}, [planes, hw](Node& self) {
    Tensor* g = input_grad(self, 0);
    if (!g) return;
    for (i64 p = 0; p < planes; ++p) {
      const double v = self.grad[p] / static_cast<double>(hw);
      for (i64 i = 0; i < hw; ++i) (*g)[p * hw + i] += v;
    }
  });
}

Var channel_mean_max(const Var& x) {
  require_rank(x, 4, "channel_mean_max");
  const i64 batch = x.dim(0), channels = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor out({batch, 2, x.dim(2), x.dim(3)});
  auto argmax = std::make_shared<std::vector<i64>>(static_cast<std::size_t>(batch * hw));
  for (i64 n = 0; n < batch; ++n)
    for (i64 i = 0; i < hw; ++i) {
      double acc = 0.0;
      double best = -std::numeric_limits<double>::infinity();
      i64 arg = 0;
      for (i64 c = 0; c < channels; ++c) {
        const double v = x.value()[(n * channels + c) * hw + i];
        acc += v;
        if (v > best) {
          best = v;
          arg = c;
        }
      }
      out[(n * 2) * hw + i] = acc / static_cast<double>(channels);
      out[(n * 2 + 1) * hw + i] = best;
      (*argmax)[n * hw + i] = arg;
    }
  return make_node(std::move(out), {x}, [=](Node& self) {
    Tensor* g = input_grad(self, 0);
    if (!g) return;
    for (i64 n = 0; n < batch; ++n)
      for (i64 i = 0; i < hw; ++i) {
        const double gm = self.grad[(n * 2) * hw + i] / static_cast<double>(channels);
        for (i64 c = 0; c < channels; ++c) (*g)[(n * channels + c) * hw + i] += gm;
        (*g)[(n * channels + (*argmax)[n * hw + i]) * hw + i] += self.grad[(n * 2 + 1) * hw + i];
      }
  });
}

Var sum(const Var& x) {
  double acc = 0.0;
  for (double v : x.value().values()) acc += v;
  return make_node(Tensor::scalar(acc), {x}, [](Node& self) {
    if (Tensor* g = input_grad(self, 0))
      for (i64 i = 0; i < g->size(); ++i) (*g)[i] += self.grad[0];
  });
}

Var mean(const Var& x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

Var mse(const Var& prediction, const Var& target) {
  require_same_shape(prediction, target, "mse");
  const i64 n = prediction.value().size();
  double acc = 0.0;
  for (i64 i = 0; i < n; ++i) {
    const double d = prediction.value()[i] - target.value()[i];
    acc += d * d;
  }
  return make_node(Tensor::scalar(acc / static_cast<double>(n)), {prediction, target},
                   [n](Node& self) {
                     const Tensor& p = in_value(self, 0);
                     const Tensor& t = in_value(self, 1);
                     const double s = 2.0 * self.grad[0] / static_cast<double>(n);
                     Tensor* gp = input_grad(self, 0);
                     Tensor* gt = input_grad(self, 1);
                     for (i64 i = 0; i < n; ++i) {
                       const double d = (p[i] - t[i]) * s;
                       if (gp) (*gp)[i] += d;
                       if (gt) (*gt)[i] -= d;
                     }
                   });
}

}  // namespace tmcast::nn
