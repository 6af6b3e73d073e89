// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef TMCAST_UNET_HPP
#define TMCAST_UNET_HPP

#include <vector>

#include "tmcast/nn/layers.hpp"

namespace tmcast::model {

struct UNetConfig {
  int in_channels = 3;
  int base_channels = 32;
  std::vector<int> channel_mult{1, 2, 4};
  int res_blocks = 2;
  int max_groups = 8;
  int global_dim = 0;  // 0 disables AdaGN modulation (plain GroupNorm)
  int seq_dim = 0;     // 0 disables cross-attention
  int attention_heads = 1;
};

/// Scale/shift predicted from the shared condition embedding.
struct AdaGN {
  nn::Linear scale;  // weights zero, bias one
  nn::Linear shift;  // zero
};

struct ResBlock {
  AdaGN norm1, norm2;
  nn::Conv2d conv1, conv2, skip;
  nn::Linear time;
  int groups1 = 1, groups2 = 1;
  bool has_skip = false;
  bool modulated = false;
};

struct CrossAttention {
  nn::Linear query, key, value, output;
  int groups = 1;
};

/// Noise predictor eps_theta(x_k, k, c_global, c_seq). Input and output
/// are (B, C, N, N); N is zero-padded symmetrically to a multiple of
/// 2^(levels-1) internally and cropped back.
class ConditionalUNet {
 public:
  static constexpr const char* kSection = "unet";

  ConditionalUNet(nn::ParamStore& store, const UNetConfig& config, nn::Rng& rng);

  /// `steps` holds one diffusion step per batch element. `c_global` (B, Dg)
  /// and `c_seq` (B, T, Ds) may be undefined when the matching path is off.
  nn::Var operator()(const nn::Var& x, const std::vector<int>& steps, const nn::Var& c_global,
                     const nn::Var& c_seq) const;

  const UNetConfig& config() const noexcept { return config_; }
  int padded_size(int n) const;
  int embed_dim() const noexcept { return 4 * config_.base_channels; }

 private:
  struct Stage {
    enum Kind { res, attn, down, up } kind;
    int index;
  };

  ResBlock make_res(nn::ParamStore& store, const std::string& name, int cin, int cout,
                    nn::Rng& rng);
  CrossAttention make_attn(nn::ParamStore& store, const std::string& name, int ch, nn::Rng& rng);
  nn::Var apply_res(const ResBlock& b, const nn::Var& x, const nn::Var& temb,
                    const nn::Var& cemb) const;
  nn::Var apply_attn(const CrossAttention& a, const nn::Var& x, const nn::Var& c_seq) const;
  nn::Var adagn(const AdaGN& m, bool modulated, int groups, const nn::Var& x,
                const nn::Var& cemb) const;

  UNetConfig config_;
  nn::Conv2d conv_in_;
  nn::Linear time_in_, time_out_;
  nn::Linear cond_in_;
  std::vector<ResBlock> res_;
  std::vector<CrossAttention> attn_;
  std::vector<nn::Conv2d> resample_;
  std::vector<Stage> encoder_, middle_, decoder_;
  std::vector<bool> encoder_push_;  // per encoder stage: output becomes a skip
  int out_groups_ = 1;
  nn::Conv2d conv_out_;
};

/// Sinusoidal embedding of integer steps, (B, dim).
nn::Tensor timestep_embedding(const std::vector<int>& steps, int dim);

}  // namespace tmcast::model

#endif  // TMCAST_UNET_HPP
