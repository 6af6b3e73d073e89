// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#include "tmcast/unet.hpp"

#include <cmath>

#include "tmcast/error.hpp"

namespace tmcast::model {

using nn::Var;

nn::Tensor timestep_embedding(const std::vector<int>& steps, int dim) {
  if (dim < 2 || dim % 2 != 0) throw ConfigError("timestep embedding width must be even");
  const int half = dim / 2;
  nn::Tensor out({static_cast<std::int64_t>(steps.size()), dim});
  for (std::size_t b = 0; b < steps.size(); ++b) {
    for (int i = 0; i < half; ++i) {
      const double freq = std::exp(-std::log(10000.0) * i / half);
      const double arg = steps[b] * freq;
      out[static_cast<std::int64_t>(b) * dim + i] = std::sin(arg);
      out[static_cast<std::int64_t>(b) * dim + half + i] = std::cos(arg);
    }
  }
  return out;
}

ResBlock ConditionalUNet::make_res(nn::ParamStore& store, const std::string& name, int cin,
                                   int cout, nn::Rng& rng) {
  const std::string s = kSection;
  ResBlock b;
  b.groups1 = nn::norm_groups(cin, config_.max_groups);
  b.groups2 = nn::norm_groups(cout, config_.max_groups);
  b.modulated = config_.global_dim > 0;
  if (b.modulated) {
    const int e = embed_dim();
    b.norm1.scale = nn::Linear(store, s, name + ".norm1.scale", e, cin, rng);
    b.norm1.shift = nn::Linear(store, s, name + ".norm1.shift", e, cin, rng);
    b.norm2.scale = nn::Linear(store, s, name + ".norm2.scale", e, cout, rng);
    b.norm2.shift = nn::Linear(store, s, name + ".norm2.shift", e, cout, rng);
    for (AdaGN* m : {&b.norm1, &b.norm2}) {
      m->scale.zero();
      m->scale.bias.mutable_value().fill(1.0);
      m->shift.zero();
    }
  }
  b.conv1 = nn::Conv2d(store, s, name + ".conv1", cin, cout, 3, 1, 1, rng);
  b.time = nn::Linear(store, s, name + ".time", embed_dim(), cout, rng);
  b.conv2 = nn::Conv2d(store, s, name + ".conv2", cout, cout, 3, 1, 1, rng);
  b.has_skip = cin != cout;
  if (b.has_skip) b.skip = nn::Conv2d(store, s, name + ".skip", cin, cout, 1, 1, 0, rng);
  return b;
}

CrossAttention ConditionalUNet::make_attn(nn::ParamStore& store, const std::string& name, int ch,
                                          nn::Rng& rng) {
  const std::string s = kSection;
  if (ch % config_.attention_heads != 0)
    throw ConfigError("unet: channel count " + std::to_string(ch) +
                      " not divisible by attention heads");
  CrossAttention a;
  a.groups = nn::norm_groups(ch, config_.max_groups);
  a.query = nn::Linear(store, s, name + ".query", ch, ch, rng, false);
  a.key = nn::Linear(store, s, name + ".key", config_.seq_dim, ch, rng, false);
  a.value = nn::Linear(store, s, name + ".value", config_.seq_dim, ch, rng, false);
  a.output = nn::Linear(store, s, name + ".output", ch, ch, rng);
  return a;
}

ConditionalUNet::ConditionalUNet(nn::ParamStore& store, const UNetConfig& config, nn::Rng& rng)
    : config_(config) {
  if (config.in_channels < 1 || config.base_channels < 1 || config.res_blocks < 1 ||
      config.channel_mult.empty() || config.attention_heads < 1)
    throw ConfigError("unet: channel counts, multipliers, res_blocks and heads must be positive");
  const std::string s = kSection;
  const int base = config.base_channels;
  const int e = embed_dim();
  const int levels = static_cast<int>(config.channel_mult.size());
  const bool xattn = config.seq_dim > 0;

  conv_in_ = nn::Conv2d(store, s, "conv_in", config.in_channels, base, 3, 1, 1, rng);
  time_in_ = nn::Linear(store, s, "time_mlp.0", e, e, rng);
  time_out_ = nn::Linear(store, s, "time_mlp.1", e, e, rng);
  if (config.global_dim > 0) cond_in_ = nn::Linear(store, s, "cond_mlp", config.global_dim, e, rng);

  std::vector<int> skips{base};
  int ch = base;
  for (int lv = 0; lv < levels; ++lv) {
    const int out = base * config.channel_mult[static_cast<std::size_t>(lv)];
    if (out < 1) throw ConfigError("unet: channel multipliers must be positive");
    const bool deepest = lv == levels - 1;
    for (int r = 0; r < config.res_blocks; ++r) {
      const std::string p = "down" + std::to_string(lv) + ".res" + std::to_string(r);
      res_.push_back(make_res(store, p, ch, out, rng));
      ch = out;
      encoder_.push_back({Stage::res, static_cast<int>(res_.size()) - 1});
      encoder_push_.push_back(!(deepest && xattn));
      if (deepest && xattn) {
        attn_.push_back(make_attn(store, p + ".attn", ch, rng));
        encoder_.push_back({Stage::attn, static_cast<int>(attn_.size()) - 1});
        encoder_push_.push_back(true);
      }
      skips.push_back(ch);
    }
    if (!deepest) {
      resample_.emplace_back(store, s, "down" + std::to_string(lv) + ".downsample", ch, ch, 3, 2,
                             1, rng);
      encoder_.push_back({Stage::down, static_cast<int>(resample_.size()) - 1});
      encoder_push_.push_back(true);
      skips.push_back(ch);
    }
  }

  res_.push_back(make_res(store, "mid.res0", ch, ch, rng));
  middle_.push_back({Stage::res, static_cast<int>(res_.size()) - 1});
  if (xattn) {
    attn_.push_back(make_attn(store, "mid.attn", ch, rng));
    middle_.push_back({Stage::attn, static_cast<int>(attn_.size()) - 1});
  }
  res_.push_back(make_res(store, "mid.res1", ch, ch, rng));
  middle_.push_back({Stage::res, static_cast<int>(res_.size()) - 1});

  for (int lv = levels - 1; lv >= 0; --lv) {
    const int out = base * config.channel_mult[static_cast<std::size_t>(lv)];
    const bool deepest = lv == levels - 1;
    for (int r = 0; r <= config.res_blocks; ++r) {
      const std::string p = "up" + std::to_string(lv) + ".res" + std::to_string(r);
      const int skip_ch = skips.back();
      skips.pop_back();
      res_.push_back(make_res(store, p, ch + skip_ch, out, rng));
      ch = out;
      decoder_.push_back({Stage::res, static_cast<int>(res_.size()) - 1});
      if (deepest && xattn) {
        attn_.push_back(make_attn(store, p + ".attn", ch, rng));
        decoder_.push_back({Stage::attn, static_cast<int>(attn_.size()) - 1});
      }
    }
    if (lv != 0) {
      resample_.emplace_back(store, s, "up" + std::to_string(lv) + ".upsample", ch, ch, 3, 1, 1,
                             rng);
      decoder_.push_back({Stage::up, static_cast<int>(resample_.size()) - 1});
    }
  }
  out_groups_ = nn::norm_groups(ch, config.max_groups);
  conv_out_ = nn::Conv2d(store, s, "conv_out", ch, config.in_channels, 3, 1, 1, rng);
  conv_out_.zero();
}

int ConditionalUNet::padded_size(int n) const {
  const int factor = 1 << (static_cast<int>(config_.channel_mult.size()) - 1);
  return (n + factor - 1) / factor * factor;
}

Var ConditionalUNet::adagn(const AdaGN& m, bool modulated, int groups, const Var& x,
                           const Var& cemb) const {
  Var n = nn::group_norm(x, groups, 1e-5);
  if (!modulated) return n;
  return nn::channel_affine(n, m.scale(cemb), m.shift(cemb));
}

Var ConditionalUNet::apply_res(const ResBlock& b, const Var& x, const Var& temb,
                               const Var& cemb) const {
  Var h = b.conv1(nn::silu(adagn(b.norm1, b.modulated, b.groups1, x, cemb)));
  h = nn::channel_affine(h, Var(), b.time(temb));
  h = b.conv2(nn::silu(adagn(b.norm2, b.modulated, b.groups2, h, cemb)));
  return nn::add(b.has_skip ? b.skip(x) : x, h);
}

Var ConditionalUNet::apply_attn(const CrossAttention& a, const Var& x, const Var& c_seq) const {
  const auto batch = x.dim(0), ch = x.dim(1), height = x.dim(2), width = x.dim(3);
  Var n = nn::group_norm(x, a.groups, 1e-5);
  Var tokens = nn::permute(nn::reshape(n, {batch, ch, height * width}), {0, 2, 1});
  Var o = nn::attention(a.query(tokens), a.key(c_seq), a.value(c_seq), config_.attention_heads,
                        false);
  o = a.output(o);
  o = nn::reshape(nn::permute(o, {0, 2, 1}), {batch, ch, height, width});
  return nn::add(x, o);
}

Var ConditionalUNet::operator()(const Var& x, const std::vector<int>& steps, const Var& c_global,
                                const Var& c_seq) const {
  if (x.value().rank() != 4 || x.dim(1) != config_.in_channels || x.dim(2) != x.dim(3))
    throw ShapeError("unet: expected (B, " + std::to_string(config_.in_channels) +
                     ", N, N), got " + nn::to_string(x.shape()));
  const auto batch = x.dim(0);
  if (static_cast<std::int64_t>(steps.size()) != batch)
    throw ShapeError("unet: need one diffusion step per batch element");
  if (config_.global_dim > 0) {
    if (!c_global.defined() || c_global.value().rank() != 2 || c_global.dim(0) != batch ||
        c_global.dim(1) != config_.global_dim)
      throw ShapeError("unet: c_global must be (B, " + std::to_string(config_.global_dim) + ")");
  }
  if (config_.seq_dim > 0) {
    if (!c_seq.defined() || c_seq.value().rank() != 3 || c_seq.dim(0) != batch ||
        c_seq.dim(2) != config_.seq_dim)
      throw ShapeError("unet: c_seq must be (B, T, " + std::to_string(config_.seq_dim) + ")");
  }

  const int n = static_cast<int>(x.dim(2));
  const int p = padded_size(n);
  const int top = (p - n) / 2, left = top;
  Var h = p == n ? x : nn::pad2d(x, top, p - n - top, left, p - n - left);

  Var temb = nn::constant(timestep_embedding(steps, embed_dim()));
  temb = nn::silu(time_out_(nn::silu(time_in_(temb))));
  Var cemb;
  if (config_.global_dim > 0) cemb = nn::silu(cond_in_(c_global));

  auto run = [&](const Stage& st, const Var& in) -> Var {
    const auto i = static_cast<std::size_t>(st.index);
    switch (st.kind) {
      case Stage::res: return apply_res(res_[i], in, temb, cemb);
      case Stage::attn: return apply_attn(attn_[i], in, c_seq);
      case Stage::down: return resample_[i](in);
      case Stage::up: return resample_[i](nn::upsample_nearest2x(in));
    }
    return in;
  };

  h = conv_in_(h);
  std::vector<Var> skips{h};
  for (std::size_t i = 0; i < encoder_.size(); ++i) {
    h = run(encoder_[i], h);
    if (encoder_push_[i]) skips.push_back(h);
  }
  for (const auto& st : middle_) h = run(st, h);
  for (const auto& st : decoder_) {
    if (st.kind == Stage::res) {
      h = nn::concat_channels(h, skips.back());
      skips.pop_back();
    }
    h = run(st, h);
  }
  h = conv_out_(nn::silu(nn::group_norm(h, out_groups_, 1e-5)));
  return p == n ? h : nn::crop2d(h, top, left, n, n);
}

}  // namespace tmcast::model
