// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#include "tmcast/conditioning.hpp"

#include <cmath>

#include "tmcast/error.hpp"

namespace tmcast::model {

using nn::Var;

GlobalPooling::GlobalPooling(nn::ParamStore& store, int hidden_dim, nn::Rng& rng) {
  query = store.add(kSection, "pool_query",
                    nn::randn({hidden_dim}, rng, 1.0 / std::sqrt(static_cast<double>(hidden_dim))));
}

PooledCondition GlobalPooling::operator()(const Var& hidden) const {
  if (hidden.value().rank() != 3 || hidden.dim(2) != query.dim(0))
    throw ShapeError("pool_global: expected (B, T, " + std::to_string(query.dim(0)) + "), got " +
                     nn::to_string(hidden.shape()));
  const auto batch = hidden.dim(0), steps = hidden.dim(1), d = hidden.dim(2);
  Var logits = nn::linear(hidden, nn::reshape(query, {d, 1}), Var());
  logits = nn::scale(nn::reshape(logits, {batch, 1, steps}), 1.0 / std::sqrt(static_cast<double>(d)));
  Var alpha = nn::softmax(logits, false);
  Var pooled = nn::reshape(nn::bmm(alpha, hidden, false, false), {batch, d});
  return {pooled, nn::reshape(alpha, {batch, steps})};
}

SequentialProjection::SequentialProjection(nn::ParamStore& store, int hidden_dim, int model_dim,
                                           nn::Rng& rng) {
  projection = nn::Linear(store, kSection, "seq_projection", hidden_dim, model_dim, rng, false);
  norm = nn::LayerNorm(store, kSection, "seq_norm", model_dim, 1e-5);
}

Var SequentialProjection::operator()(const Var& hidden) const {
  if (hidden.value().rank() != 3 || hidden.dim(2) != projection.weight.dim(0))
    throw ShapeError("project_sequential: expected (B, T, " +
                     std::to_string(projection.weight.dim(0)) + "), got " +
                     nn::to_string(hidden.shape()));
  return norm(projection(hidden));
}

}  // namespace tmcast::model
