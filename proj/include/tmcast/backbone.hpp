// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef TMCAST_BACKBONE_HPP
#define TMCAST_BACKBONE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "tmcast/nn/layers.hpp"

// Frozen transformer backbone with trainable parallel adapters, plus the
// projection that aligns visual tokens with the backbone width.
namespace tmcast::model {

struct BackboneConfig {
  std::string source = "toy_random";  // or "external_checkpoint"
  std::string checkpoint_path;        // for external_checkpoint
  int layers = 2;
  int hidden_dim = 128;  // D_LLM
  int heads = 4;
  int ffn_multiplier = 4;
  std::uint64_t seed = 20240601;
};

struct AdapterConfig {
  int rank = 16;
  std::vector<int> kernel_sizes{3, 5};
  double lambda_init = 0.1;
  bool lambda_learnable = true;
};

struct BackboneFlags {
  bool adapter_enabled = true;
  bool msc_enabled = true;
};

/// TE = Z * W_proj + P_pos.
class ModalityAlignment {
 public:
  static constexpr const char* kSection = "alignment";

  ModalityAlignment(nn::ParamStore& store, int sequence_length, int model_dim, int hidden_dim,
                    nn::Rng& rng);
  /// (B, T, D_model) -> (B, T, D_LLM)
  nn::Var operator()(const nn::Var& tokens) const;

  nn::Linear projection;  // no bias
  nn::Var positional;     // (T, D_LLM)
};

/// Pre-norm causal transformer blocks whose parameters never train.
class FrozenBackbone {
 public:
  static constexpr const char* kSection = "backbone";

  FrozenBackbone(nn::ParamStore& store, const BackboneConfig& config);

  /// Full block output for layer l (residuals included).
  nn::Var block(int layer, const nn::Var& h) const;
  int layers() const noexcept { return static_cast<int>(blocks_.size()); }
  const BackboneConfig& config() const noexcept { return config_; }

 private:
  struct Block {
    nn::LayerNorm norm1;
    nn::Linear query, key, value, output;
    nn::LayerNorm norm2;
    nn::Linear ffn_in, ffn_out;
  };
  BackboneConfig config_;
  std::vector<Block> blocks_;
};

/// Bottleneck adapter: down-projection to rank r, multi-scale temporal
/// convolutions (or a single linear map when MSC is disabled), then a
/// sigmoid-gated up-projection back to D_LLM.
class Adapter {
 public:
  Adapter(nn::ParamStore& store, const std::string& prefix, int hidden_dim,
          const AdapterConfig& config, bool multi_scale, nn::Rng& rng);

  /// (B, T, D_LLM) -> (B, T, D_LLM)
  nn::Var operator()(const nn::Var& h) const;
  bool multi_scale() const noexcept { return multi_scale_; }

  nn::Linear down;
  std::vector<nn::Conv1dTime> convs;
  nn::Linear mix;  // replaces convs when MSC is off
  nn::Linear gate;
  nn::Linear up;  // zero-initialized

 private:
  bool multi_scale_;
};

class AdapterStack {
 public:
  static constexpr const char* kSection = "adapters";

  AdapterStack(nn::ParamStore& store, int layers, int hidden_dim, const AdapterConfig& config,
               bool multi_scale, nn::Rng& rng);

  std::vector<Adapter> adapters;
  std::vector<nn::Var> lambdas;  // one {1} scale per layer
};

/// h_l = Block_l(h_{l-1}) + lambda_l * Adapter_l(h_{l-1}). With
/// adapter_enabled false (or no stack) only the frozen blocks run.
nn::Var backbone_forward(const FrozenBackbone& backbone, const AdapterStack* adapters,
                         const nn::Var& embedding, const BackboneFlags& flags);

/// Trainable D_LLM -> D_LLM map standing in for the whole backbone.
class LinearBypass {
 public:
  static constexpr const char* kSection = "llm_bypass";

  LinearBypass(nn::ParamStore& store, int hidden_dim, nn::Rng& rng);
  nn::Var operator()(const nn::Var& embedding) const { return map(embedding); }

  nn::Linear map;
};

}  // namespace tmcast::model

#endif  // TMCAST_BACKBONE_HPP
