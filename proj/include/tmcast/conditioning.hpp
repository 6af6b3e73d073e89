// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef TMCAST_CONDITIONING_HPP
#define TMCAST_CONDITIONING_HPP

#include "tmcast/nn/layers.hpp"

namespace tmcast::model {

struct PooledCondition {
  nn::Var global;   // (B, D_LLM)
  nn::Var weights;  // (B, T), each row on the simplex
};

/// Attention pooling of the backbone output with a learnable query:
/// alpha = softmax(H q / sqrt(D_LLM)), c_global = sum_i alpha_i H[i].
class GlobalPooling {
 public:
  static constexpr const char* kSection = "conditioning";

  GlobalPooling(nn::ParamStore& store, int hidden_dim, nn::Rng& rng);
  PooledCondition operator()(const nn::Var& hidden) const;

  nn::Var query;  // (D_LLM)
};

/// c_seq = LayerNorm(H W_seq), per timestep, eps 1e-5.
class SequentialProjection {
 public:
  static constexpr const char* kSection = "conditioning";

  SequentialProjection(nn::ParamStore& store, int hidden_dim, int model_dim, nn::Rng& rng);
  /// (B, T, D_LLM) -> (B, T, D_model)
  nn::Var operator()(const nn::Var& hidden) const;

  nn::Linear projection;  // no bias
  nn::LayerNorm norm;
};

}  // namespace tmcast::model

#endif  // TMCAST_CONDITIONING_HPP
