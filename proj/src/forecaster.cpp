// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#include "tmcast/forecaster.hpp"

#include <algorithm>
#include <cmath>

#include "tmcast/error.hpp"

namespace tmcast::model {

using nn::Shape;
using nn::Tensor;
using nn::Var;

const std::array<Ablation, 6>& all_ablations() {
  static const std::array<Ablation, 6> kAll{Ablation::full,       Ablation::no_msc,
                                            Ablation::no_cglobal, Ablation::no_cseq,
                                            Ablation::no_llm,     Ablation::grayscale};
  return kAll;
}

std::string_view ablation_name(Ablation a) {
  switch (a) {
    case Ablation::full: return "full";
    case Ablation::no_msc: return "no_msc";
    case Ablation::no_cglobal: return "no_cglobal";
    case Ablation::no_cseq: return "no_cseq";
    case Ablation::no_llm: return "no_llm";
    case Ablation::grayscale: return "grayscale";
  }
  return "unknown";
}

Ablation parse_ablation(std::string_view name) {
  std::string valid;
  for (Ablation a : all_ablations()) {
    if (ablation_name(a) == name) return a;
    if (!valid.empty()) valid += ", ";
    valid += ablation_name(a);
  }
  throw ConfigError("unknown ablation variant '" + std::string(name) + "' (valid: " + valid + ")");
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
}

EncodedSeries encode_series(const data::TrafficMatrixSeries& series, image::ImageMode mode) {
  EncodedSeries out;
  out.node_count = series.node_count;
  out.channels = image::channel_count(mode);
  out.frames = image::image_encode(image::color_encode(series), mode);
  return out;
}

Batch make_batch(const EncodedSeries& series, const std::vector<std::size_t>& origins,
                 int input_length, int output_length) {
  const std::int64_t n = series.node_count;
  const std::int64_t c = series.channels;
  const std::int64_t plane = n * n;
  const auto b = static_cast<std::int64_t>(origins.size());
  Batch batch;
  batch.origins = origins;
  batch.inputs = Tensor({b, input_length, c, n, n});
  batch.targets = Tensor({b, output_length * c, n, n});
  for (std::int64_t i = 0; i < b; ++i) {
    const std::size_t o = origins[static_cast<std::size_t>(i)];
    if (o + static_cast<std::size_t>(input_length + output_length) > series.frames.size())
      throw ShapeError("make_batch: window at " + std::to_string(o) + " runs past the series");
    for (int t = 0; t < input_length + output_length; ++t) {
      const auto& frame = series.frames[o + static_cast<std::size_t>(t)];
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const auto& src = frame.normalized[static_cast<std::size_t>(ch)];
        double* dst = t < input_length
                          ? batch.inputs.data() + ((i * input_length + t) * c + ch) * plane
                          : batch.targets.data() +
                                ((i * output_length + (t - input_length)) * c + ch) * plane;
        std::copy(src.begin(), src.end(), dst);
      }
    }
  }
  return batch;
}

Forecaster::Forecaster(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  if (config.node_count < 3) throw ConfigError("model: node_count must be >= 3");
  if (config.input_length < 1 || config.output_length < 1)
    throw ConfigError("model: input_length and output_length must be >= 1");
  schedule_ = diffusion::NoiseSchedule::linear(config.diffusion_steps, config.beta_start,
                                               config.beta_end);
  nn::Rng rng(seed);
  const Ablation ab = config.ablation;
  const int d_llm = config.backbone.hidden_dim;

  VisionEncoderConfig vc = config.vision;
  vc.in_channels = channels();
  vision_.emplace(store_, vc, config.input_length, rng);
  alignment_.emplace(store_, config.input_length, vc.model_dim, d_llm, rng);
  if (ab == Ablation::no_llm) {
    bypass_.emplace(store_, d_llm, rng);
  } else {
    backbone_.emplace(store_, config.backbone);
    adapters_.emplace(store_, config.backbone.layers, d_llm, config.adapter,
                      ab != Ablation::no_msc, rng);
  }
  if (ab != Ablation::no_cglobal) pooling_.emplace(store_, d_llm, rng);
  if (ab != Ablation::no_cseq) seq_projection_.emplace(store_, d_llm, vc.model_dim, rng);

  UNetConfig uc;
  uc.in_channels = target_channels();
  uc.base_channels = config.base_channels;
  uc.channel_mult = config.channel_mult;
  uc.res_blocks = config.res_blocks;
  uc.max_groups = config.max_groups;
  uc.attention_heads = config.attention_heads;
  uc.global_dim = pooling_ ? d_llm : 0;
  uc.seq_dim = seq_projection_ ? vc.model_dim : 0;
  unet_.emplace(store_, uc, rng);
}

void Forecaster::set_schedule(diffusion::NoiseSchedule schedule) {
  schedule_ = std::move(schedule);
}

int Forecaster::channels() const noexcept {
  return config_.ablation == Ablation::grayscale ? 1 : 3;
}

Conditions Forecaster::condition(const Var& images, bool adapters_enabled) const {
  if (images.value().rank() != 5 || images.dim(2) != channels() ||
      images.dim(3) != config_.node_count || images.dim(4) != config_.node_count)
    throw ShapeError("forecaster: expected (B, T_in, " + std::to_string(channels()) + ", " +
                     std::to_string(config_.node_count) + ", " +
                     std::to_string(config_.node_count) + "), got " +
                     nn::to_string(images.shape()));
  Var te = (*alignment_)(vision_->forward(images));
  Conditions c;
  if (bypass_) {
    c.hidden = (*bypass_)(te);
  } else {
    BackboneFlags flags;
    flags.adapter_enabled = adapters_enabled;
    flags.msc_enabled = config_.ablation != Ablation::no_msc;
    c.hidden = backbone_forward(*backbone_, &*adapters_, te, flags);
  }
  if (pooling_) {
    PooledCondition p = (*pooling_)(c.hidden);
    c.c_global = p.global;
    c.weights = p.weights;
  }
  if (seq_projection_) c.c_seq = (*seq_projection_)(c.hidden);
  return c;
}

Var Forecaster::predict_noise(const Var& x_k, const std::vector<int>& steps,
                              const Conditions& conditions) const {
  return (*unet_)(x_k, steps, conditions.c_global, conditions.c_seq);
}

Var Forecaster::loss(const Tensor& inputs, const Tensor& targets, const std::vector<int>& steps,
                     const Tensor& noise) const {
  const std::int64_t b = inputs.dim(0);
  const Shape expect{b, target_channels(), config_.node_count, config_.node_count};
  if (targets.shape() != expect || noise.shape() != expect)
    throw ShapeError("forecaster loss: targets and noise must be " + nn::to_string(expect));
  if (static_cast<std::int64_t>(steps.size()) != b)
    throw ShapeError("forecaster loss: need one step per batch element");
  const std::int64_t per = targets.size() / b;
  Tensor x_k(expect);
  for (std::int64_t i = 0; i < b; ++i) {
    const int k = steps[static_cast<std::size_t>(i)];
    if (k < 1 || k > schedule_.steps())
      throw ConfigError("forecaster loss: step " + std::to_string(k) + " out of range");
    const double a = std::sqrt(schedule_.alpha_bar(k));
    const double s = std::sqrt(1.0 - schedule_.alpha_bar(k));
    for (std::int64_t j = i * per; j < (i + 1) * per; ++j)
      x_k[j] = a * targets[j] + s * noise[j];
  }
  Conditions c = condition(nn::constant(inputs));
  return nn::mse(predict_noise(nn::constant(std::move(x_k)), steps, c), nn::constant(noise));
}

Var Forecaster::loss(const Tensor& inputs, const Tensor& targets, nn::Rng& rng) const {
  std::uniform_int_distribution<int> pick(1, schedule_.steps());
  std::vector<int> steps(static_cast<std::size_t>(inputs.dim(0)));
  for (int& k : steps) k = pick(rng);
  Tensor noise = nn::randn(targets.shape(), rng);
  return loss(inputs, targets, steps, noise);
}

Tensor Forecaster::sample(const Tensor& inputs, const SamplerOptions& options,
                          const std::vector<std::uint64_t>& seeds, Tensor* weights) const {
  if (options.num_samples < 1) throw ConfigError("sampler: num_samples must be >= 1");
  const std::int64_t b = inputs.dim(0);
  if (static_cast<std::int64_t>(seeds.size()) != b)
    throw ShapeError("sampler: need one seed per batch element");
  nn::NoGradGuard no_grad;
  const Conditions c = condition(nn::constant(inputs));
  if (weights && c.weights.defined()) *weights = c.weights.value();

  const Shape shape{b, target_channels(), config_.node_count, config_.node_count};
  const std::int64_t per = nn::numel(shape) / b;
  Tensor acc(shape, 0.0);
  for (int s = 0; s < options.num_samples; ++s) {
    std::vector<nn::Rng> streams;
    for (std::int64_t i = 0; i < b; ++i)
      streams.emplace_back(stream_seed(seeds[static_cast<std::size_t>(i)],
                                       static_cast<std::uint64_t>(s)));
    auto draw = [&](int, const Shape& sh) {
      Tensor z(sh);
      for (std::int64_t i = 0; i < b; ++i) {
        Tensor part = nn::randn({per}, streams[static_cast<std::size_t>(i)]);
        std::copy(part.data(), part.data() + per, z.data() + i * per);
      }
      return z;
    };
    auto predict = [&](const Tensor& x, int k) {
      return predict_noise(nn::constant(x), std::vector<int>(static_cast<std::size_t>(b), k), c)
          .value();
    };
    Tensor x_K = draw(0, shape);
    Tensor out = options.kind == SamplerOptions::ancestral
                     ? diffusion::sample_ddpm(predict, schedule_, std::move(x_K), draw)
                     : diffusion::sample_ddim(predict, schedule_, std::move(x_K), options.ddim,
                                              draw);
    for (std::int64_t j = 0; j < acc.size(); ++j) acc[j] += out[j];
  }
  if (options.num_samples > 1)
    for (std::int64_t j = 0; j < acc.size(); ++j) acc[j] /= options.num_samples;
  return acc;
}

}  // namespace tmcast::model
