// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef TMCAST_NN_OPS_HPP
#define TMCAST_NN_OPS_HPP

#include <vector>

#include "tmcast/nn/autograd.hpp"

// Differentiable operations. Layout conventions: images are (B, C, H, W),
// sequences are (B, T, D). All ops check shapes and throw ShapeError.
namespace tmcast::nn {

inline Var constant(Tensor t) { return Var(std::move(t), false); }

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
/// s has shape {1}.
Var scale_by(const Var& x, const Var& s);

Var silu(const Var& x);
Var sigmoid(const Var& x);

/// x (..., in) · W (in, out) + b (out). `b` may be undefined.
Var linear(const Var& x, const Var& w, const Var& b);
/// Batched matmul of rank-3 operands, op(a) (B, M, K) · op(b) (B, K, N).
Var bmm(const Var& a, const Var& b, bool trans_a, bool trans_b);
/// Softmax over the last dimension. With `causal`, the last two dims are a
/// square (query, key) grid and keys after the query are excluded.
Var softmax(const Var& x, bool causal);

/// Per-row normalization over the last dimension; gamma/beta optional.
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps);
/// (B, C, ...) normalized over groups of C/groups channels, no affine.
Var group_norm(const Var& x, int groups, double eps);

/// x (B, Cin, H, W), w (Cout, Cin, k, k), b (Cout) or undefined.
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int padding);
/// Convolution along T of x (B, T, Cin) with w (Cout, Cin, k), zero
/// same-padding (k odd).
Var conv1d_time(const Var& x, const Var& w, const Var& b);

/// x (B, C, ...) * scale (B, C) + shift (B, C); either may be undefined.
Var channel_affine(const Var& x, const Var& scale, const Var& shift);
/// x (B, C, H, W) * gate (B, 1, H, W).
Var spatial_gate(const Var& x, const Var& gate);
/// Repeats p along a new leading batch axis.
Var broadcast_batch(const Var& p, std::int64_t batch);

Var reshape(const Var& x, Shape shape);
/// Axis permutation for rank <= 4.
Var permute(const Var& x, const std::vector<int>& perm);
/// Concatenation along axis 1 of (B, C1, ...) and (B, C2, ...).
Var concat_channels(const Var& a, const Var& b);
Var pad2d(const Var& x, int top, int bottom, int left, int right);
Var crop2d(const Var& x, int top, int left, std::int64_t height, std::int64_t width);
Var upsample_nearest2x(const Var& x);

/// (B, C, H, W) -> (B, C)
Var mean_spatial(const Var& x);
/// (B, C, H, W) -> (B, 2, H, W): channel mean, channel max.
Var channel_mean_max(const Var& x);

Var sum(const Var& x);
Var mean(const Var& x);
Var mse(const Var& prediction, const Var& target);

}  // namespace tmcast::nn

#endif  // TMCAST_NN_OPS_HPP
