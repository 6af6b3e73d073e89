// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef TMCAST_NN_LAYERS_HPP
#define TMCAST_NN_LAYERS_HPP

#include <string>
#include <vector>

#include "tmcast/nn/ops.hpp"

namespace tmcast::nn {

struct ParamEntry {
  std::string section;
  std::string name;
  Var var;
  bool trainable = true;
};

/// Ordered registry of named parameters grouped into checkpoint sections.
/// Registration order is the canonical serialization order.
class ParamStore {
 public:
  Var add(const std::string& section, const std::string& name, Tensor init,
          bool trainable = true);

  const std::vector<ParamEntry>& entries() const noexcept { return entries_; }
  std::vector<ParamEntry>& entries() noexcept { return entries_; }
  const ParamEntry* find(const std::string& section, const std::string& name) const;
  std::vector<std::string> sections() const;
  std::vector<Var> trainable_params() const;
  void zero_grad();

 private:
  std::vector<ParamEntry> entries_;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), the usual default for dense and
// convolutional weights.
Tensor fan_in_uniform(const Shape& shape, std::int64_t fan_in, Rng& rng);

class Linear {
 public:
  Linear() = default;
  Linear(ParamStore& store, const std::string& section, const std::string& name,
         std::int64_t in, std::int64_t out, Rng& rng, bool bias = true, bool trainable = true);
  Var operator()(const Var& x) const { return linear(x, weight, bias); }
  /// Sets weight and bias to zero.
  void zero();

  Var weight;  // (in, out)
  Var bias;    // (out) or undefined
};

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParamStore& store, const std::string& section, const std::string& name,
         std::int64_t in_channels, std::int64_t out_channels, int kernel, int stride,
         int padding, Rng& rng, bool bias = true);
  Var operator()(const Var& x) const { return conv2d(x, weight, bias, stride_, padding_); }
  void zero();

  Var weight;  // (out, in, k, k)
  Var bias;

 private:
  int stride_ = 1;
  int padding_ = 0;
};

class Conv1dTime {
 public:
  Conv1dTime() = default;
  Conv1dTime(ParamStore& store, const std::string& section, const std::string& name,
             std::int64_t in_channels, std::int64_t out_channels, int kernel, Rng& rng);
  Var operator()(const Var& x) const { return conv1d_time(x, weight, bias); }

  Var weight;  // (out, in, k)
  Var bias;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParamStore& store, const std::string& section, const std::string& name,
            std::int64_t dim, double eps = 1e-5, bool trainable = true);
  Var operator()(const Var& x) const { return layer_norm(x, gamma, beta, eps_); }

  Var gamma;
  Var beta;

 private:
  double eps_ = 1e-5;
};

/// Largest group count <= max_groups that divides channels.
int norm_groups(std::int64_t channels, int max_groups);

/// Scaled dot-product attention of q (B, Tq, D) over k, v (B, Tk, D) split
/// into `heads` heads of width D / heads. `logit_scale` < 0 selects the
/// default 1 / sqrt(D / heads).
Var attention(const Var& q, const Var& k, const Var& v, int heads, bool causal,
              double logit_scale = -1.0);

/// Sinusoidal position table (length, dim).
Tensor sinusoidal_table(std::int64_t length, std::int64_t dim);

}  // namespace tmcast::nn

#endif  // TMCAST_NN_LAYERS_HPP
