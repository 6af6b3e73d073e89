// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef TMCAST_FORECASTER_HPP
#define TMCAST_FORECASTER_HPP

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "tmcast/backbone.hpp"
#include "tmcast/conditioning.hpp"
#include "tmcast/data.hpp"
#include "tmcast/diffusion.hpp"
#include "tmcast/traffic_image.hpp"
#include "tmcast/unet.hpp"
#include "tmcast/vision_encoder.hpp"

namespace tmcast::model {

enum class Ablation { full, no_msc, no_cglobal, no_cseq, no_llm, grayscale };

const std::array<Ablation, 6>& all_ablations();
std::string_view ablation_name(Ablation a);
/// Throws ConfigError listing the valid names.
Ablation parse_ablation(std::string_view name);

struct ModelConfig {
  int node_count = 6;
  int input_length = 8;   // T_in
  int output_length = 1;  // T_out
  VisionEncoderConfig vision;
  BackboneConfig backbone;
  AdapterConfig adapter;
  int base_channels = 16;
  std::vector<int> channel_mult{1, 2, 4};
  int res_blocks = 2;
  int attention_heads = 1;
  int max_groups = 8;
  int diffusion_steps = 200;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  Ablation ablation = Ablation::full;
};

struct Conditions {
  nn::Var hidden;    // backbone output (B, T, D_LLM)
  nn::Var c_global;  // (B, D_LLM), undefined for no_cglobal
  nn::Var weights;   // pooling weights (B, T)
  nn::Var c_seq;     // (B, T, D_model), undefined for no_cseq
};

struct SamplerOptions {
  enum Kind { ancestral, implicit } kind = implicit;  // DDPM or DDIM
  diffusion::DdimOptions ddim;
  int num_samples = 1;  // draws averaged into the point forecast
};

/// Images of one split, encoded once after splitting.
struct EncodedSeries {
  int node_count = 0;
  int channels = 0;
  std::vector<image::TrafficImage> frames;
};

EncodedSeries encode_series(const data::TrafficMatrixSeries& series, image::ImageMode mode);

struct Batch {
  nn::Tensor inputs;   // (B, T_in, C, N, N) normalized
  nn::Tensor targets;  // (B, T_out * C, N, N) normalized
  std::vector<std::size_t> origins;
};

Batch make_batch(const EncodedSeries& series, const std::vector<std::size_t>& origins,
                 int input_length, int output_length);

/// The whole pipeline: vision encoder, alignment, frozen backbone with
/// adapters (or the linear bypass), dual conditioning, and the diffusion
/// U-Net over the stacked future frames.
class Forecaster {
 public:
  Forecaster(const ModelConfig& config, std::uint64_t seed);
  Forecaster(const Forecaster&) = delete;
  Forecaster& operator=(const Forecaster&) = delete;

  const ModelConfig& config() const noexcept { return config_; }
  nn::ParamStore& params() noexcept { return store_; }
  const nn::ParamStore& params() const noexcept { return store_; }
  const diffusion::NoiseSchedule& schedule() const noexcept { return schedule_; }
  void set_schedule(diffusion::NoiseSchedule schedule);
  int channels() const noexcept;
  int target_channels() const noexcept { return channels() * config_.output_length; }

  /// `adapters_enabled` false runs the frozen blocks alone.
  Conditions condition(const nn::Var& images, bool adapters_enabled = true) const;
  nn::Var predict_noise(const nn::Var& x_k, const std::vector<int>& steps,
                        const Conditions& conditions) const;

  /// L_diff with explicit steps and noise.
  nn::Var loss(const nn::Tensor& inputs, const nn::Tensor& targets, const std::vector<int>& steps,
               const nn::Tensor& noise) const;
  /// L_diff with k ~ U{1..K} per element and Gaussian noise from rng.
  nn::Var loss(const nn::Tensor& inputs, const nn::Tensor& targets, nn::Rng& rng) const;

  /// Point forecast (B, T_out * C, N, N) in normalized space. `seeds` gives
  /// one independent stream per batch element. Pooling weights go to
  /// `weights` when given.
  nn::Tensor sample(const nn::Tensor& inputs, const SamplerOptions& options,
                    const std::vector<std::uint64_t>& seeds, nn::Tensor* weights = nullptr) const;

  VisionEncoder& vision() noexcept { return *vision_; }
  const FrozenBackbone& backbone() const noexcept { return *backbone_; }
  AdapterStack* adapters() noexcept { return adapters_ ? &*adapters_ : nullptr; }
  const ConditionalUNet& unet() const noexcept { return *unet_; }

 private:
  ModelConfig config_;
  nn::ParamStore store_;
  std::optional<VisionEncoder> vision_;
  std::optional<ModalityAlignment> alignment_;
  std::optional<FrozenBackbone> backbone_;
  std::optional<AdapterStack> adapters_;
  std::optional<LinearBypass> bypass_;
  std::optional<GlobalPooling> pooling_;
  std::optional<SequentialProjection> seq_projection_;
  std::optional<ConditionalUNet> unet_;
  diffusion::NoiseSchedule schedule_;
};

/// Mixes a run seed with indices into an independent stream seed.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace tmcast::model

#endif  // TMCAST_FORECASTER_HPP
