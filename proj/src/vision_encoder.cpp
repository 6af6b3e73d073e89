// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#include "tmcast/vision_encoder.hpp"

#include "tmcast/error.hpp"

namespace tmcast::model {

using nn::Var;

VisionEncoder::VisionEncoder(nn::ParamStore& store, const VisionEncoderConfig& config,
                             int sequence_length, nn::Rng& rng)
    : config_(config),
      sequence_length_(sequence_length),
      groups_(nn::norm_groups(config.feature_dim, config.max_groups)) {
  if (sequence_length < 1) throw ConfigError("vision encoder: sequence length must be >= 1");
  if (config.feature_dim < 1 || config.model_dim < 1 || config.in_channels < 1)
    throw ConfigError("vision encoder: dimensions must be positive");
  if (config.model_dim % config.heads != 0)
    throw ConfigError("vision encoder: model_dim must be divisible by heads");
  const std::string s = kSection;
  stem_ = nn::Conv2d(store, s, "stem", config.in_channels, config.feature_dim, 3, 1, 1, rng);
  for (int b = 0; b < config.residual_blocks; ++b) {
    const std::string p = "block" + std::to_string(b);
    blocks_.push_back({nn::Conv2d(store, s, p + ".conv1", config.feature_dim, config.feature_dim,
                                  3, 1, 1, rng),
                       nn::Conv2d(store, s, p + ".conv2", config.feature_dim, config.feature_dim,
                                  3, 1, 1, rng)});
  }
  const int k = config.attention_kernel;
  gate_conv_ = nn::Conv2d(store, s, "spatial_attention", 2, 1, k, 1, k / 2, rng);
  // Salience prior: a unit center tap makes strongly active locations gate
  // higher than their surroundings from the start.
  for (int c = 0; c < 2; ++c)
    gate_conv_.weight.mutable_value()[(c * k + k / 2) * k + k / 2] += 1.0;
  key_proj = nn::Linear(store, s, "key", config.feature_dim, config.model_dim, rng, false);
  value_proj = nn::Linear(store, s, "value", config.feature_dim, config.model_dim, rng, false);
  temporal_query = store.add(s, "temporal_query",
                             nn::sinusoidal_table(sequence_length, config.model_dim));
}

Var VisionEncoder::encode_frames(const Var& images, std::vector<nn::Shape>* stages) const {
  if (images.value().rank() != 4 || images.dim(1) != config_.in_channels)
    throw ShapeError("vision encoder: expected (F, " + std::to_string(config_.in_channels) +
                     ", N, N) input, got " + nn::to_string(images.shape()));
  const auto h = images.dim(2), w = images.dim(3);
  if (h < 3 || w < 3)
    throw ConfigError("vision encoder: spatial size below 3x3 is not supported");
  auto record = [&](const Var& v) {
    if (v.dim(2) != h || v.dim(3) != w)
      throw ShapeError("vision encoder: stage changed resolution to " + nn::to_string(v.shape()));
    if (stages) stages->push_back(v.shape());
  };
  Var x = stem_(images);
  record(x);
  for (const auto& block : blocks_) {
    Var y = block.conv1(nn::silu(nn::group_norm(x, groups_, 1e-5)));
    y = block.conv2(nn::silu(nn::group_norm(y, groups_, 1e-5)));
    x = nn::add(x, y);
    record(x);
  }
  x = spatial_attention(x);
  record(x);
  return x;
}

Var VisionEncoder::spatial_gate(const Var& features) const {
  if (hooks.unit_gate) {
    nn::Tensor ones({features.dim(0), 1, features.dim(2), features.dim(3)}, 1.0);
    return nn::constant(std::move(ones));
  }
  return nn::sigmoid(gate_conv_(nn::channel_mean_max(features)));
}

Var VisionEncoder::spatial_attention(const Var& features) const {
  return nn::spatial_gate(features, spatial_gate(features));
}

Var VisionEncoder::aggregate_causal(const Var& feature_maps, std::int64_t batch) const {
  if (feature_maps.value().rank() != 4 || feature_maps.dim(1) != config_.feature_dim)
    throw ShapeError("aggregate_causal: expected (B*T, D_v, H, W), got " +
                     nn::to_string(feature_maps.shape()));
  if (batch < 1 || feature_maps.dim(0) != batch * sequence_length_)
    throw ShapeError("aggregate_causal: expected " + std::to_string(sequence_length_) +
                     " frames per sequence, got " + std::to_string(feature_maps.dim(0)) +
                     " frames for batch " + std::to_string(batch));
  Var pooled = nn::reshape(nn::mean_spatial(feature_maps),
                           {batch, sequence_length_, config_.feature_dim});
  Var keys = key_proj(pooled);
  Var values = value_proj(pooled);
  Var queries = nn::broadcast_batch(temporal_query, batch);
  return nn::attention(queries, keys, values, config_.heads, true,
                       hooks.uniform_logits ? 0.0 : -1.0);
}

Var VisionEncoder::forward(const Var& images) const {
  if (images.value().rank() != 5 || images.dim(1) != sequence_length_)
    throw ShapeError("vision encoder: expected (B, " + std::to_string(sequence_length_) +
                     ", C, N, N), got " + nn::to_string(images.shape()));
  const auto batch = images.dim(0);
  Var frames = nn::reshape(images, {batch * sequence_length_, images.dim(2), images.dim(3),
                                    images.dim(4)});
  return aggregate_causal(encode_frames(frames), batch);
}

}  // namespace tmcast::model
