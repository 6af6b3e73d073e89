// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#include "tmcast/backbone.hpp"

#include "tmcast/error.hpp"

namespace tmcast::model {

using nn::Var;

ModalityAlignment::ModalityAlignment(nn::ParamStore& store, int sequence_length, int model_dim,
                                     int hidden_dim, nn::Rng& rng) {
  projection = nn::Linear(store, kSection, "projection", model_dim, hidden_dim, rng, false);
  positional = store.add(kSection, "positional",
                         nn::randn({sequence_length, hidden_dim}, rng, 0.02));
}

Var ModalityAlignment::operator()(const Var& tokens) const {
  if (tokens.value().rank() != 3 || tokens.dim(1) != positional.dim(0) ||
      tokens.dim(2) != projection.weight.dim(0))
    throw ShapeError("align_modality: expected (B, " + std::to_string(positional.dim(0)) + ", " +
                     std::to_string(projection.weight.dim(0)) + "), got " +
                     nn::to_string(tokens.shape()));
  return nn::add(projection(tokens), nn::broadcast_batch(positional, tokens.dim(0)));
}

FrozenBackbone::FrozenBackbone(nn::ParamStore& store, const BackboneConfig& config)
    : config_(config) {
  if (config.layers < 1 || config.hidden_dim < 1 || config.heads < 1 ||
      config.hidden_dim % config.heads != 0)
    throw ConfigError("backbone: layers, hidden_dim and heads must be positive and hidden_dim "
                      "divisible by heads");
  // Own stream: the frozen weights do not depend on the experiment seed.
  nn::Rng rng(config.seed);
  const int d = config.hidden_dim;
  const int f = d * config.ffn_multiplier;
  const std::string s = kSection;
  for (int l = 0; l < config.layers; ++l) {
    const std::string p = "layer" + std::to_string(l);
    Block b;
    b.norm1 = nn::LayerNorm(store, s, p + ".norm1", d, 1e-5, false);
    b.query = nn::Linear(store, s, p + ".query", d, d, rng, true, false);
    b.key = nn::Linear(store, s, p + ".key", d, d, rng, true, false);
    b.value = nn::Linear(store, s, p + ".value", d, d, rng, true, false);
    b.output = nn::Linear(store, s, p + ".output", d, d, rng, true, false);
    b.norm2 = nn::LayerNorm(store, s, p + ".norm2", d, 1e-5, false);
    b.ffn_in = nn::Linear(store, s, p + ".ffn_in", d, f, rng, true, false);
    b.ffn_out = nn::Linear(store, s, p + ".ffn_out", f, d, rng, true, false);
    blocks_.push_back(std::move(b));
  }
}

Var FrozenBackbone::block(int layer, const Var& h) const {
  const Block& b = blocks_.at(static_cast<std::size_t>(layer));
  Var x = b.norm1(h);
  Var attn = nn::attention(b.query(x), b.key(x), b.value(x), config_.heads, true);
  Var h1 = nn::add(h, b.output(attn));
  Var ffn = b.ffn_out(nn::silu(b.ffn_in(b.norm2(h1))));
  return nn::add(h1, ffn);
}

Adapter::Adapter(nn::ParamStore& store, const std::string& prefix, int hidden_dim,
                 const AdapterConfig& config, bool multi_scale, nn::Rng& rng)
    : multi_scale_(multi_scale) {
  if (config.rank < 1) throw ConfigError("adapter: rank must be positive");
  const std::string s = AdapterStack::kSection;
  down = nn::Linear(store, s, prefix + ".down", hidden_dim, config.rank, rng);
  if (multi_scale) {
    if (config.kernel_sizes.empty()) throw ConfigError("adapter: kernel_sizes is empty");
    for (int k : config.kernel_sizes) {
      if (k < 1 || k % 2 == 0) throw ConfigError("adapter: kernel sizes must be odd");
      convs.emplace_back(store, s, prefix + ".conv" + std::to_string(k), config.rank,
                         config.rank, k, rng);
    }
  } else {
    mix = nn::Linear(store, s, prefix + ".mix", config.rank, config.rank, rng);
  }
  gate = nn::Linear(store, s, prefix + ".gate", config.rank, hidden_dim, rng);
  up = nn::Linear(store, s, prefix + ".up", config.rank, hidden_dim, rng);
  up.zero();
}

Var Adapter::operator()(const Var& h) const {
  Var hd = down(h);
  Var mid;
  if (multi_scale_) {
    mid = convs.front()(hd);
    for (std::size_t i = 1; i < convs.size(); ++i) mid = nn::add(mid, convs[i](hd));
  } else {
    mid = mix(hd);
  }
  mid = nn::silu(mid);
  return nn::mul(nn::sigmoid(gate(mid)), up(mid));
}

AdapterStack::AdapterStack(nn::ParamStore& store, int layers, int hidden_dim,
                           const AdapterConfig& config, bool multi_scale, nn::Rng& rng) {
  for (int l = 0; l < layers; ++l) {
    const std::string p = "layer" + std::to_string(l);
    adapters.emplace_back(store, p, hidden_dim, config, multi_scale, rng);
    lambdas.push_back(store.add(kSection, p + ".lambda", nn::Tensor::scalar(config.lambda_init),
                                config.lambda_learnable));
  }
}

Var backbone_forward(const FrozenBackbone& backbone, const AdapterStack* adapters,
                     const Var& embedding, const BackboneFlags& flags) {
  if (embedding.value().rank() != 3 || embedding.dim(2) != backbone.config().hidden_dim)
    throw ShapeError("backbone_forward: expected (B, T, " +
                     std::to_string(backbone.config().hidden_dim) + "), got " +
                     nn::to_string(embedding.shape()));
  const bool use_adapters = flags.adapter_enabled && adapters != nullptr;
  if (use_adapters) {
    if (static_cast<int>(adapters->adapters.size()) != backbone.layers())
      throw ShapeError("backbone_forward: adapter count differs from layer count");
    for (const auto& a : adapters->adapters)
      if (a.multi_scale() != flags.msc_enabled)
        throw ConfigError("backbone_forward: msc flag does not match the adapter construction");
  }
  Var h = embedding;
  for (int l = 0; l < backbone.layers(); ++l) {
    Var next = backbone.block(l, h);
    if (use_adapters) {
      const auto li = static_cast<std::size_t>(l);
      next = nn::add(next, nn::scale_by(adapters->adapters[li](h), adapters->lambdas[li]));
    }
    h = next;
  }
  return h;
}

LinearBypass::LinearBypass(nn::ParamStore& store, int hidden_dim, nn::Rng& rng) {
  map = nn::Linear(store, kSection, "map", hidden_dim, hidden_dim, rng);
}

}  // namespace tmcast::model
