// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "tmcast/backbone.hpp"
#include "tmcast/checkpoint.hpp"
#include "tmcast/error.hpp"
#include "tmcast/nn/optim.hpp"
#include "tmcast/testkit.hpp"

using namespace tmcast;
using namespace tmcast::model;
using nn::Shape;
using nn::Tensor;
using nn::Var;

namespace {

BackboneConfig toy_backbone() {
  BackboneConfig c;
  c.layers = 2;
  c.hidden_dim = 16;
  c.heads = 4;
  c.ffn_multiplier = 2;
  return c;
}

AdapterConfig small_adapter(int rank = 4) {
  AdapterConfig a;
  a.rank = rank;
  return a;
}

void randomize(nn::Linear& l, nn::Rng& rng) {
  l.weight.mutable_value() = nn::randn(l.weight.shape(), rng, 0.3);
  if (l.bias.defined()) l.bias.mutable_value() = nn::randn(l.bias.shape(), rng, 0.1);
}

}  // namespace

TEST_SUITE("backbone") {
  TEST_CASE("alignment with identity-padded projection and zero positions zero-pads the tokens") {
    nn::ParamStore store;
    nn::Rng rng(1);
    ModalityAlignment align(store, 3, 4, 6, rng);
    Tensor& w = align.projection.weight.mutable_value();  // (4, 6)
    w.fill(0.0);
    for (int i = 0; i < 4; ++i) w[i * 6 + i] = 1.0;
    align.positional.mutable_value().fill(0.0);
    const Tensor z = nn::randn({2, 3, 4}, rng);
    const Tensor out = align(nn::constant(z)).value();
    for (int r = 0; r < 6; ++r)
      for (int d = 0; d < 6; ++d) CHECK(out[r * 6 + d] == (d < 4 ? z[r * 4 + d] : 0.0));
  }

  TEST_CASE("alignment of zero tokens returns the positional table") {
    nn::ParamStore store;
    nn::Rng rng(2);
    ModalityAlignment align(store, 3, 4, 6, rng);
    const Tensor out = align(nn::constant(Tensor({1, 3, 4}, 0.0))).value();
    CHECK(out.reshaped({3, 6}).identical(align.positional.value()));
  }

  TEST_CASE("alignment is reproducible for a fixed seed") {
    nn::ParamStore s1, s2;
    nn::Rng r1(3), r2(3);
    ModalityAlignment a1(s1, 3, 4, 6, r1), a2(s2, 3, 4, 6, r2);
    nn::Rng rz(4);
    const Tensor z = nn::randn({2, 3, 4}, rz);
    CHECK(a1(nn::constant(z)).value().identical(a2(nn::constant(z)).value()));
  }

  TEST_CASE("backbone weights are frozen and independent of the experiment seed") {
    nn::ParamStore s1, s2;
    FrozenBackbone b1(s1, toy_backbone()), b2(s2, toy_backbone());
    const auto census = testkit::param_census(s1);
    const auto* sec = testkit::find_section(census, "backbone");
    REQUIRE(sec != nullptr);
    CHECK(sec->trainable == 0);
    CHECK(sec->frozen > 0);
    CHECK(io::section_checksum(s1, "backbone") == io::section_checksum(s2, "backbone"));
  }

  TEST_CASE("zero-initialized up-projection makes the adapter output exactly zero") {
    nn::ParamStore store;
    nn::Rng rng(5);
    Adapter a(store, "layer0", 16, small_adapter(), true, rng);
    const Tensor out = a(nn::constant(nn::randn({2, 5, 16}, rng))).value();
    for (double v : out.values()) CHECK(v == 0.0);
  }

  TEST_CASE("adapter handles a single time step") {
    nn::ParamStore store;
    nn::Rng rng(6);
    Adapter a(store, "layer0", 16, small_adapter(), true, rng);
    randomize(a.up, rng);
    const Tensor out = a(nn::constant(nn::randn({1, 1, 16}, rng))).value();
    CHECK(out.shape() == Shape{1, 1, 16});
    CHECK(out.all_finite());
  }

  TEST_CASE("lambda zero and disabled adapters give bitwise-identical outputs") {
    nn::ParamStore store;
    nn::Rng rng(7);
    FrozenBackbone bb(store, toy_backbone());
    AdapterStack stack(store, 2, 16, small_adapter(), true, rng);
    for (auto& a : stack.adapters) randomize(a.up, rng);
    const Var x = nn::constant(nn::randn({2, 5, 16}, rng));
    BackboneFlags off;
    off.adapter_enabled = false;
    const Tensor frozen = backbone_forward(bb, &stack, x, off).value();
    const Tensor alone = backbone_forward(bb, nullptr, x, off).value();
    CHECK(frozen.identical(alone));
    const Tensor adapted = backbone_forward(bb, &stack, x, {}).value();
    CHECK(!adapted.identical(frozen));
    for (auto& l : stack.lambdas) l.mutable_value().fill(0.0);
    CHECK(backbone_forward(bb, &stack, x, {}).value().identical(frozen));
  }

  TEST_CASE("identity at initialization") {
    nn::ParamStore store;
    nn::Rng rng(8);
    FrozenBackbone bb(store, toy_backbone());
    AdapterStack stack(store, 2, 16, small_adapter(), true, rng);
    const Var x = nn::constant(nn::randn({2, 6, 16}, rng));
    BackboneFlags off;
    off.adapter_enabled = false;
    CHECK(backbone_forward(bb, &stack, x, {}).value().identical(
        backbone_forward(bb, &stack, x, off).value()));
  }

  TEST_CASE("frozen backbone is causal at every position") {
    for (int t_in : {1, 8, 24}) {
      nn::ParamStore store;
      nn::Rng rng(9);
      FrozenBackbone bb(store, toy_backbone());
      BackboneFlags off;
      off.adapter_enabled = false;
      auto fwd = [&](const Tensor& x) {
        return backbone_forward(bb, nullptr, nn::constant(x), off).value();
      };
      const Tensor x = nn::randn({2, t_in, 16}, rng);
      for (int t = 0; t < t_in; ++t) CHECK(testkit::causality_probe(fwd, x, t, 1, 1, rng));
    }
  }

  TEST_CASE("an optimizer step changes adapters but never the backbone") {
    nn::ParamStore store;
    nn::Rng rng(10);
    FrozenBackbone bb(store, toy_backbone());
    AdapterStack stack(store, 2, 16, small_adapter(), true, rng);
    const std::string before_bb = io::section_checksum(store, "backbone");
    const std::string before_ad = io::section_checksum(store, "adapters");
    nn::AdamW opt(store.trainable_params(), {});
    const Var x = nn::constant(nn::randn({2, 4, 16}, rng));
    const Tensor target = nn::randn({2, 4, 16}, rng);
    for (int step = 0; step < 2; ++step) {
      opt.zero_grad();
      nn::backward(nn::mse(backbone_forward(bb, &stack, x, {}), nn::constant(target)));
      opt.step(1e-2);
    }
    CHECK(io::section_checksum(store, "backbone") == before_bb);
    CHECK(io::section_checksum(store, "adapters") != before_ad);
  }

  TEST_CASE("adapter gradients match finite differences at r = 4, T_in = 6, D_LLM = 16") {
    nn::ParamStore store;
    nn::Rng rng(11);
    Adapter a(store, "layer0", 16, small_adapter(4), true, rng);
    randomize(a.up, rng);
    Var h(nn::randn({1, 6, 16}, rng), true);
    const Tensor w = nn::randn({1, 6, 16}, rng);
    auto loss = [&] { return nn::sum(nn::mul(a(h), nn::constant(w))); };
    std::vector<std::pair<std::string, Var>> blocks{
        {"h", h}, {"down", a.down.weight}, {"gate", a.gate.weight}, {"up", a.up.weight}};
    for (std::size_t i = 0; i < a.convs.size(); ++i)
      blocks.push_back({"conv" + std::to_string(i), a.convs[i].weight});
    const auto report = testkit::grad_check(loss, blocks, 1e-4);
    INFO(report.summary());
    CHECK(report.passed());
  }

  TEST_CASE("parameter accounting across variants") {
    nn::Rng rng(12);
    nn::ParamStore full_store, plain_store, fixed_store;
    AdapterStack full(full_store, 2, 128, small_adapter(16), true, rng);
    AdapterStack plain(plain_store, 2, 128, small_adapter(16), false, rng);
    AdapterConfig fixed_cfg = small_adapter(16);
    fixed_cfg.lambda_learnable = false;
    AdapterStack fixed(fixed_store, 2, 128, fixed_cfg, true, rng);
    const auto full_n = testkit::total_trainable(testkit::param_census(full_store));
    const auto plain_n = testkit::total_trainable(testkit::param_census(plain_store));
    const auto fixed_n = testkit::total_trainable(testkit::param_census(fixed_store));
    CHECK(plain_n < full_n);
    // Dropping learnable lambdas removes exactly one scalar per layer.
    CHECK(full_n - fixed_n == 2);

    nn::ParamStore bb_store;
    FrozenBackbone bb(bb_store, BackboneConfig{});
    const auto* frozen = testkit::find_section(testkit::param_census(bb_store), "backbone");
    CHECK(static_cast<double>(full_n) / static_cast<double>(frozen->frozen) < 0.2);
  }

  TEST_CASE("invalid adapter and backbone settings are configuration errors") {
    nn::ParamStore store;
    nn::Rng rng(13);
    AdapterConfig bad = small_adapter();
    bad.kernel_sizes = {4};
    CHECK_THROWS_AS(Adapter(store, "x", 16, bad, true, rng), ConfigError);
    BackboneConfig b = toy_backbone();
    b.heads = 3;
    CHECK_THROWS_AS(FrozenBackbone(store, b), ConfigError);
  }
}
