// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef TMCAST_VISION_ENCODER_HPP
#define TMCAST_VISION_ENCODER_HPP

#include <vector>

#include "tmcast/nn/layers.hpp"

namespace tmcast::model {

struct VisionEncoderConfig {
  int in_channels = 3;
  int feature_dim = 32;  // D_v
  int model_dim = 32;    // D_model
  int residual_blocks = 2;
  int heads = 1;
  int max_groups = 8;
  int attention_kernel = 7;
};

/// Resolution-preserving CNN (3x3 stem, stride-1 residual blocks, spatial
/// attention) followed by causal attention of learnable temporal queries
/// over the per-frame feature vectors.
class VisionEncoder {
 public:
  static constexpr const char* kSection = "vision_encoder";

  VisionEncoder(nn::ParamStore& store, const VisionEncoderConfig& config, int sequence_length,
                nn::Rng& rng);

  /// (F, C, N, N) -> (F, D_v, N, N). Records the output shape of every
  /// stage in `stages` when given.
  nn::Var encode_frames(const nn::Var& images, std::vector<nn::Shape>* stages = nullptr) const;
  /// Per-location gate in (0, 1), shape (F, 1, N, N).
  nn::Var spatial_gate(const nn::Var& features) const;
  nn::Var spatial_attention(const nn::Var& features) const;

  /// Feature maps (B * T, D_v, N, N) of `batch` sequences -> tokens
  /// (B, T, D_model). Token t only sees frames <= t.
  nn::Var aggregate_causal(const nn::Var& feature_maps, std::int64_t batch) const;

  /// Normalized images (B, T, C, N, N) -> tokens (B, T, D_model).
  nn::Var forward(const nn::Var& images) const;

  int sequence_length() const noexcept { return sequence_length_; }
  const VisionEncoderConfig& config() const noexcept { return config_; }

  struct TestHooks {
    bool unit_gate = false;       // spatial attention passes features through
    bool uniform_logits = false;  // temporal attention logits all equal
  };
  TestHooks hooks;

  nn::Var temporal_query;  // (T, D_model)
  nn::Linear key_proj;     // D_v -> D_model
  nn::Linear value_proj;

 private:
  struct ResidualBlock {
    nn::Conv2d conv1;
    nn::Conv2d conv2;
  };

  VisionEncoderConfig config_;
  int sequence_length_;
  int groups_;
  nn::Conv2d stem_;
  std::vector<ResidualBlock> blocks_;
  nn::Conv2d gate_conv_;
};

}  // namespace tmcast::model

#endif  // TMCAST_VISION_ENCODER_HPP
