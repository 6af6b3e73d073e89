// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "tmcast/error.hpp"
#include "tmcast/testkit.hpp"
#include "tmcast/unet.hpp"

using namespace tmcast;
using namespace tmcast::model;
using nn::Tensor;
using nn::Var;

namespace {

UNetConfig toy_unet(int global_dim, int seq_dim) {
  UNetConfig c;
  c.in_channels = 3;
  c.base_channels = 16;
  c.channel_mult = {1, 2, 4};
  c.res_blocks = 2;
  c.global_dim = global_dim;
  c.seq_dim = seq_dim;
  return c;
}

UNetConfig micro_unet() {
  UNetConfig c;
  c.in_channels = 2;
  c.base_channels = 4;
  c.channel_mult = {1, 2};
  c.res_blocks = 1;
  c.max_groups = 2;
  c.global_dim = 4;
  c.seq_dim = 4;
  return c;
}

void randomize_all(nn::ParamStore& store, nn::Rng& rng, double sd) {
  for (auto& e : store.entries()) e.var.mutable_value() = nn::randn(e.var.shape(), rng, sd);
}

}  // namespace

TEST_SUITE("unet") {
  TEST_CASE("noise prediction keeps the input shape for 6, 12 and 23 nodes") {
    nn::ParamStore store;
    nn::Rng rng(1);
    ConditionalUNet unet(store, toy_unet(32, 16), rng);
    CHECK(unet.padded_size(6) == 8);
    CHECK(unet.padded_size(12) == 12);
    CHECK(unet.padded_size(23) == 24);
    for (int n : {6, 12, 23}) {
      const Var x = nn::constant(nn::randn({2, 3, n, n}, rng));
      const Var g = nn::constant(nn::randn({2, 32}, rng));
      const Var s = nn::constant(nn::randn({2, 5, 16}, rng));
      const Tensor out = unet(x, {3, 150}, g, s).value();
      CHECK(out.shape() == nn::Shape{2, 3, n, n});
      CHECK(out.all_finite());
    }
  }

  TEST_CASE("a fresh network predicts zero noise") {
    nn::ParamStore store;
    nn::Rng rng(2);
    ConditionalUNet unet(store, toy_unet(0, 0), rng);
    const Tensor out = unet(nn::constant(nn::randn({1, 3, 6, 6}, rng)), {10}, Var(), Var()).value();
    for (std::int64_t i = 0; i < out.size(); ++i) CHECK(out[i] == 0.0);
  }

  TEST_CASE("identity modulation reduces AdaGN to plain group normalization") {
    nn::ParamStore plain_store, mod_store;
    nn::Rng r1(3), r2(3);
    ConditionalUNet plain(plain_store, toy_unet(0, 0), r1);
    ConditionalUNet mod(mod_store, toy_unet(8, 0), r2);
    nn::Rng rng(4);
    randomize_all(plain_store, rng, 0.2);
    for (auto& e : mod_store.entries()) {
      if (const nn::ParamEntry* p = plain_store.find(e.section, e.name))
        e.var.mutable_value() = p->var.value();
    }
    const Var x = nn::constant(nn::randn({2, 3, 6, 6}, rng));
    const Tensor a = plain(x, {5, 9}, Var(), Var()).value();
    for (int trial = 0; trial < 2; ++trial) {
      const Var g = nn::constant(nn::randn({2, 8}, rng, 3.0));
      CHECK(mod(x, {5, 9}, g, Var()).value().identical(a));
    }
  }

  TEST_CASE("a repeated key/value row makes attention return its value projection") {
    nn::Rng rng(5);
    const Tensor row = nn::randn({4}, rng);
    Tensor kv({1, 3, 4});
    for (int t = 0; t < 3; ++t)
      for (int d = 0; d < 4; ++d) kv[t * 4 + d] = row[d];
    const Var q = nn::constant(nn::randn({1, 7, 4}, rng, 5.0));
    const Tensor out = nn::attention(q, nn::constant(kv), nn::constant(kv), 1, false).value();
    for (int i = 0; i < 7; ++i)
      for (int d = 0; d < 4; ++d) CHECK(out[i * 4 + d] == doctest::Approx(row[d]).epsilon(1e-12));
  }

  TEST_CASE("cross-attention over a repeated condition row ignores the sequence length") {
    nn::ParamStore store;
    nn::Rng rng(6);
    ConditionalUNet unet(store, toy_unet(0, 8), rng);
    randomize_all(store, rng, 0.2);
    const Tensor row = nn::randn({8}, rng);
    Tensor one({1, 1, 8}), many({1, 5, 8});
    for (int d = 0; d < 8; ++d) {
      one[d] = row[d];
      for (int t = 0; t < 5; ++t) many[t * 8 + d] = row[d];
    }
    const Var x = nn::constant(nn::randn({1, 3, 6, 6}, rng));
    const Tensor a = unet(x, {4}, Var(), nn::constant(one)).value();
    const Tensor b = unet(x, {4}, Var(), nn::constant(many)).value();
    CHECK(a.max_abs_diff(b) < 1e-10);
  }

  TEST_CASE("the prediction depends on the diffusion step") {
    nn::ParamStore store;
    nn::Rng rng(7);
    ConditionalUNet unet(store, toy_unet(0, 0), rng);
    randomize_all(store, rng, 0.2);
    const Var x = nn::constant(nn::randn({1, 3, 6, 6}, rng));
    CHECK(unet(x, {1}, Var(), Var()).value().max_abs_diff(unet(x, {100}, Var(), Var()).value()) >
          1e-6);
  }

  TEST_CASE("missing or mis-shaped conditions are shape errors") {
    nn::ParamStore store;
    nn::Rng rng(8);
    ConditionalUNet unet(store, toy_unet(8, 4), rng);
    const Var x = nn::constant(Tensor({1, 3, 6, 6}));
    const Var g = nn::constant(Tensor({1, 8}));
    const Var s = nn::constant(Tensor({1, 2, 4}));
    CHECK_THROWS_AS(unet(x, {1}, Var(), s), ShapeError);
    CHECK_THROWS_AS(unet(x, {1}, g, Var()), ShapeError);
    CHECK_THROWS_AS(unet(x, {1, 2}, g, s), ShapeError);
    CHECK_THROWS_AS(unet(nn::constant(Tensor({1, 2, 6, 6})), {1}, g, s), ShapeError);
  }

  TEST_CASE("micro U-Net gradients match central differences") {
    nn::ParamStore store;
    nn::Rng rng(9);
    ConditionalUNet unet(store, micro_unet(), rng);
    randomize_all(store, rng, 0.3);
    Var x(nn::randn({1, 2, 8, 8}, rng), true);
    Var g(nn::randn({1, 4}, rng), true);
    Var s(nn::randn({1, 3, 4}, rng), true);
    const Tensor w = nn::randn({1, 2, 8, 8}, rng);
    auto loss = [&] { return nn::sum(nn::mul(unet(x, {7}, g, s), nn::constant(w))); };
    std::vector<std::pair<std::string, Var>> blocks{{"x", x}, {"c_global", g}, {"c_seq", s}};
    for (const auto& e : store.entries()) blocks.push_back({e.name, e.var});
    const auto report = testkit::grad_check(loss, blocks, 1e-3, 1e-5, 4);
    INFO(report.summary());
    CHECK(report.passed());
  }
}
