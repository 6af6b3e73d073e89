// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#include "tmcast/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "tmcast/error.hpp"

namespace tmcast::nn {

Var ParamStore::add(const std::string& section, const std::string& name, Tensor init,
                    bool trainable) {
  if (find(section, name))
    throw ShapeError("duplicate parameter " + section + "/" + name);
  Var v(std::move(init), trainable);
  entries_.push_back({section, name, v, trainable});
  return v;
}

const ParamEntry* ParamStore::find(const std::string& section, const std::string& name) const {
  for (const auto& e : entries_)
    if (e.section == section && e.name == name) return &e;
  return nullptr;
}

std::vector<std::string> ParamStore::sections() const {
  std::vector<std::string> out;
  for (const auto& e : entries_)
    if (out.empty() || out.back() != e.section) {
      bool seen = false;
      for (const auto& s : out) seen = seen || s == e.section;
      if (!seen) out.push_back(e.section);
    }
  return out;
}

std::vector<Var> ParamStore::trainable_params() const {
  std::vector<Var> out;
  for (const auto& e : entries_)
    if (e.trainable) out.push_back(e.var);
  return out;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.var.zero_grad();
}

Tensor fan_in_uniform(const Shape& shape, std::int64_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return rand_uniform(shape, rng, -bound, bound);
}

Linear::Linear(ParamStore& store, const std::string& section, const std::string& name,
               std::int64_t in, std::int64_t out, Rng& rng, bool use_bias, bool trainable) {
  weight = store.add(section, name + ".weight", fan_in_uniform({in, out}, in, rng), trainable);
  if (use_bias)
    bias = store.add(section, name + ".bias", fan_in_uniform({out}, in, rng), trainable);
}

void Linear::zero() {
  weight.mutable_value().fill(0.0);
  if (bias.defined()) bias.mutable_value().fill(0.0);
}

Conv2d::Conv2d(ParamStore& store, const std::string& section, const std::string& name,
               std::int64_t in_channels, std::int64_t out_channels, int kernel, int stride,
               int padding, Rng& rng, bool use_bias)
    : stride_(stride), padding_(padding) {
  const std::int64_t fan_in = in_channels * kernel * kernel;
  weight = store.add(section, name + ".weight",
                     fan_in_uniform({out_channels, in_channels, kernel, kernel}, fan_in, rng));
  if (use_bias)
    bias = store.add(section, name + ".bias", fan_in_uniform({out_channels}, fan_in, rng));
}

void Conv2d::zero() {
  weight.mutable_value().fill(0.0);
  if (bias.defined()) bias.mutable_value().fill(0.0);
}

Conv1dTime::Conv1dTime(ParamStore& store, const std::string& section, const std::string& name,
                       std::int64_t in_channels, std::int64_t out_channels, int kernel,
                       Rng& rng) {
  const std::int64_t fan_in = in_channels * kernel;
  weight = store.add(section, name + ".weight",
                     fan_in_uniform({out_channels, in_channels, kernel}, fan_in, rng));
  bias = store.add(section, name + ".bias", fan_in_uniform({out_channels}, fan_in, rng));
}

LayerNorm::LayerNorm(ParamStore& store, const std::string& section, const std::string& name,
                     std::int64_t dim, double eps, bool trainable)
    : eps_(eps) {
  gamma = store.add(section, name + ".gamma", Tensor({dim}, 1.0), trainable);
  beta = store.add(section, name + ".beta", Tensor({dim}, 0.0), trainable);
}

int norm_groups(std::int64_t channels, int max_groups) {
  int g = static_cast<int>(std::min<std::int64_t>(channels, max_groups));
  while (g > 1 && channels % g != 0) --g;
  return std::max(g, 1);
}

Var attention(const Var& q, const Var& k, const Var& v, int heads, bool causal,
              double logit_scale) {
  if (q.value().rank() != 3 || k.value().rank() != 3 || v.value().rank() != 3)
    throw ShapeError("attention: expected rank-3 q, k, v");
  const std::int64_t batch = q.dim(0), tq = q.dim(1), d = q.dim(2), tk = k.dim(1);
  if (k.dim(2) != d || v.dim(2) != d || v.dim(1) != tk || heads < 1 || d % heads != 0)
    throw ShapeError("attention: incompatible q/k/v or head count");
  const std::int64_t dh = d / heads;
  const double s = logit_scale < 0.0 ? 1.0 / std::sqrt(static_cast<double>(dh)) : logit_scale;
  if (heads == 1) {
    Var logits = scale(bmm(q, k, false, true), s);
    return bmm(softmax(logits, causal), v, false, false);
  }
  auto split = [&](const Var& x, std::int64_t t) {
    return reshape(permute(reshape(x, {batch, t, heads, dh}), {0, 2, 1, 3}),
                   {batch * heads, t, dh});
  };
  Var logits = scale(bmm(split(q, tq), split(k, tk), false, true), s);
  Var out = bmm(softmax(logits, causal), split(v, tk), false, false);
  return reshape(permute(reshape(out, {batch, heads, tq, dh}), {0, 2, 1, 3}), {batch, tq, d});
}

Tensor sinusoidal_table(std::int64_t length, std::int64_t dim) {
  Tensor t({length, dim});
  for (std::int64_t pos = 0; pos < length; ++pos)
    for (std::int64_t i = 0; i < dim; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) /
                                                 static_cast<double>(dim));
      const double angle = static_cast<double>(pos) * freq;
      t[pos * dim + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  return t;
}

}  // namespace tmcast::nn
