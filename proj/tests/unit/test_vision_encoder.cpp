// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>

#include "tmcast/error.hpp"
#include "tmcast/nn/ops.hpp"
#include "tmcast/testkit.hpp"
#include "tmcast/vision_encoder.hpp"

using namespace tmcast;
using namespace tmcast::model;
using nn::Shape;
using nn::Tensor;

namespace {

VisionEncoderConfig small_config() {
  VisionEncoderConfig c;
  c.in_channels = 3;
  c.feature_dim = 8;
  c.model_dim = 8;
  c.residual_blocks = 2;
  c.attention_kernel = 7;
  return c;
}

}  // namespace

TEST_SUITE("vision_encoder") {
  TEST_CASE("every stage preserves the grid for N = 12 and N = 23") {
    for (int n : {12, 23}) {
      nn::ParamStore store;
      nn::Rng rng(1);
      VisionEncoder enc(store, small_config(), 2, rng);
      std::vector<Shape> stages;
      const auto out = enc.encode_frames(nn::constant(nn::randn({2, 3, n, n}, rng)), &stages);
      CHECK(out.shape() == Shape{2, 8, n, n});
      CHECK(stages.size() == 4);  // stem, two residual blocks, spatial attention
      for (const auto& s : stages) {
        CHECK(s[2] == n);
        CHECK(s[3] == n);
      }
    }
  }

  TEST_CASE("a single-pixel perturbation changes the features") {
    nn::ParamStore store;
    nn::Rng rng(2);
    VisionEncoder enc(store, small_config(), 1, rng);
    Tensor x = nn::randn({1, 3, 6, 6}, rng);
    const auto a = enc.encode_frames(nn::constant(x)).value();
    x[0] += 0.5;
    const auto b = enc.encode_frames(nn::constant(x)).value();
    CHECK(!a.identical(b));
  }

  TEST_CASE("features are not permutation invariant over pixels") {
    nn::ParamStore store;
    nn::Rng rng(3);
    VisionEncoder enc(store, small_config(), 1, rng);
    Tensor x = nn::randn({1, 3, 5, 5}, rng);
    Tensor y = x;
    for (int c = 0; c < 3; ++c) std::swap(y[c * 25 + 0], y[c * 25 + 12]);
    const auto fx = nn::mean_spatial(enc.encode_frames(nn::constant(x))).value();
    const auto fy = nn::mean_spatial(enc.encode_frames(nn::constant(y))).value();
    CHECK(fx.max_abs_diff(fy) > 1e-9);
  }

  TEST_CASE("unit gate hook makes spatial attention the identity") {
    nn::ParamStore store;
    nn::Rng rng(4);
    VisionEncoder enc(store, small_config(), 1, rng);
    enc.hooks.unit_gate = true;
    const auto f = nn::constant(nn::randn({2, 8, 5, 5}, rng));
    CHECK(enc.spatial_attention(f).value().identical(f.value()));
  }

  TEST_CASE("gates lie strictly inside (0, 1)") {
    nn::ParamStore store;
    nn::Rng rng(5);
    VisionEncoder enc(store, small_config(), 1, rng);
    const auto g = enc.spatial_gate(nn::constant(nn::randn({2, 8, 6, 6}, rng))).value();
    CHECK(g.shape() == Shape{2, 1, 6, 6});
    for (double v : g.values()) CHECK((v > 0.0 && v < 1.0));
  }

  TEST_CASE("a single bright location gates at least the median") {
    nn::ParamStore store;
    nn::Rng rng(6);
    VisionEncoder enc(store, small_config(), 1, rng);
    Tensor f = nn::randn({1, 8, 9, 9}, rng, 0.05);
    const int loc = 4 * 9 + 4;
    for (int c = 0; c < 8; ++c) f[c * 81 + loc] = 3.0;
    const auto g = enc.spatial_gate(nn::constant(f)).value();
    std::vector<double> v(g.values().begin(), g.values().end());
    std::nth_element(v.begin(), v.begin() + 40, v.end());
    CHECK(g[loc] >= v[40]);
  }

  TEST_CASE("T_in = 1 yields one token attending only to its frame") {
    nn::ParamStore store;
    nn::Rng rng(7);
    VisionEncoder enc(store, small_config(), 1, rng);
    const auto maps = nn::constant(nn::randn({2, 8, 4, 4}, rng));
    const auto z = enc.aggregate_causal(maps, 2).value();
    CHECK(z.shape() == Shape{2, 1, 8});
    // With one position the softmax weight is exactly 1: token = value.
    const auto v = enc.value_proj(nn::reshape(nn::mean_spatial(maps), {2, 1, 8})).value();
    CHECK(z.max_abs_diff(v) < 1e-14);
  }

  TEST_CASE("uniform logits average the value vectors of the prefix") {
    nn::ParamStore store;
    nn::Rng rng(8);
    const int t_in = 4;
    VisionEncoder enc(store, small_config(), t_in, rng);
    enc.hooks.uniform_logits = true;
    const auto maps = nn::constant(nn::randn({t_in, 8, 3, 3}, rng));
    const auto z = enc.aggregate_causal(maps, 1).value();
    const auto v = enc.value_proj(nn::reshape(nn::mean_spatial(maps), {1, t_in, 8})).value();
    for (int t = 0; t < t_in; ++t)
      for (int d = 0; d < 8; ++d) {
        double mean = 0.0;
        for (int u = 0; u <= t; ++u) mean += v[u * 8 + d];
        mean /= t + 1;
        CHECK(z[t * 8 + d] == doctest::Approx(mean).epsilon(1e-12));
      }
  }

  TEST_CASE("aggregation is causal at every position") {
    for (int t_in : {1, 4, 8}) {
      nn::ParamStore store;
      nn::Rng rng(9);
      VisionEncoder enc(store, small_config(), t_in, rng);
      const Tensor maps = nn::randn({t_in, 8, 3, 3}, rng);
      auto fwd = [&](const Tensor& x) { return enc.aggregate_causal(nn::constant(x), 1).value(); };
      // Frame axis 0 of (T, D_v, H, W) maps to token axis 1 of (1, T, D).
      for (int t = 0; t < t_in; ++t) CHECK(testkit::causality_probe(fwd, maps, t, 0, 1, rng));
    }
  }

  TEST_CASE("full forward maps (B, T, C, N, N) to (B, T, D_model)") {
    nn::ParamStore store;
    nn::Rng rng(10);
    VisionEncoder enc(store, small_config(), 3, rng);
    const auto z = enc.forward(nn::constant(nn::randn({2, 3, 3, 5, 5}, rng)));
    CHECK(z.shape() == Shape{2, 3, 8});
    CHECK_THROWS_AS(enc.forward(nn::constant(nn::randn({2, 4, 3, 5, 5}, rng))), ShapeError);
  }

  TEST_CASE("aggregation gradients match finite differences on a 4-frame D_v = 8 instance") {
    nn::ParamStore store;
    nn::Rng rng(11);
    VisionEncoder enc(store, small_config(), 4, rng);
    nn::Var maps(nn::randn({4, 8, 3, 3}, rng), true);
    const Tensor w = nn::randn({1, 4, 8}, rng);
    auto loss = [&] { return nn::sum(nn::mul(enc.aggregate_causal(maps, 1), nn::constant(w))); };
    const auto report = testkit::grad_check(
        loss, {{"maps", maps}, {"temporal_query", enc.temporal_query},
               {"key", enc.key_proj.weight}, {"value", enc.value_proj.weight}},
        1e-4);
    INFO(report.summary());
    CHECK(report.passed());
  }
}
