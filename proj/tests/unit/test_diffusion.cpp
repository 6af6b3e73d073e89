// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "tmcast/diffusion.hpp"
#include "tmcast/error.hpp"
#include "tmcast/testkit.hpp"

using namespace tmcast;
using namespace tmcast::diffusion;
using nn::Tensor;

namespace {

// Exact noise predictor for per-pixel Gaussian data N(mu, s^2).
NoisePredictor gaussian_oracle(const NoiseSchedule& s, double mu, double sd) {
  return [&s, mu, sd](const Tensor& x, int k) {
    const double ab = s.alpha_bar(k);
    const double denom = ab * sd * sd + 1.0 - ab;
    Tensor e(x.shape());
    for (std::int64_t i = 0; i < x.size(); ++i)
      e[i] = std::sqrt(1.0 - ab) * (x[i] - std::sqrt(ab) * mu) / denom;
    return e;
  };
}

// Exact noise predictor when the data is the single point x0.
NoisePredictor point_oracle(const NoiseSchedule& s, const Tensor& x0) {
  return [&s, x0](const Tensor& x, int k) {
    const double ab = s.alpha_bar(k);
    Tensor e(x.shape());
    for (std::int64_t i = 0; i < x.size(); ++i)
      e[i] = (x[i] - std::sqrt(ab) * x0[i]) / std::sqrt(1.0 - ab);
    return e;
  };
}

NoisePredictor zero_predictor() {
  return [](const Tensor& x, int) { return Tensor(x.shape(), 0.0); };
}

}  // namespace

TEST_SUITE("diffusion") {
  TEST_CASE("two-step schedule matches the hand products") {
    const NoiseSchedule s = NoiseSchedule::linear(2);
    CHECK(s.beta(1) == 1e-4);
    CHECK(s.beta(2) == 0.02);
    CHECK(s.alpha_bar(1) == doctest::Approx(1.0 - 1e-4).epsilon(1e-15));
    CHECK(s.alpha_bar(2) == doctest::Approx((1.0 - 1e-4) * (1.0 - 0.02)).epsilon(1e-15));
    CHECK(s.alpha_bar(0) == 1.0);
  }

  TEST_CASE("a thousand-step linear schedule almost fully noises") {
    const NoiseSchedule s = NoiseSchedule::linear(1000);
    double log_prod = 0.0;
    for (int k = 1; k <= 1000; ++k) log_prod += std::log1p(-(1e-4 + (0.02 - 1e-4) * (k - 1) / 999.0));
    CHECK(s.alpha_bar(1000) == doctest::Approx(std::exp(log_prod)).epsilon(1e-10));
    CHECK(s.alpha_bar(1000) < 1e-3);
  }

  TEST_CASE("alpha_bar is strictly decreasing and inside (0, 1]") {
    for (const NoiseSchedule& s :
         {NoiseSchedule::linear(1000), NoiseSchedule::linear(200, 5e-4, 0.1)}) {
      for (int k = 1; k <= s.steps(); ++k) {
        CHECK(s.alpha_bar(k) > 0.0);
        CHECK(s.alpha_bar(k) <= 1.0);
        CHECK(s.alpha_bar(k) < s.alpha_bar(k - 1));
      }
    }
  }

  TEST_CASE("schedule configuration errors") {
    CHECK_THROWS_AS(NoiseSchedule::linear(1), ConfigError);
    CHECK_THROWS_AS(NoiseSchedule::linear(10, 0.0, 0.02), ConfigError);
    CHECK_THROWS_AS(NoiseSchedule::linear(10, 0.1, 0.01), ConfigError);
    CHECK_THROWS_AS(NoiseSchedule::from_betas({0.1, 1.0}), ConfigError);
  }

  TEST_CASE("explicit betas rebuild an identical schedule") {
    const NoiseSchedule a = NoiseSchedule::linear(200, 5e-4, 0.1);
    const NoiseSchedule b = NoiseSchedule::from_betas(a.betas());
    CHECK(a.alpha_bars() == b.alpha_bars());
  }

  TEST_CASE("forward noising matches an independent scalar closed form") {
    const NoiseSchedule s = NoiseSchedule::linear(1000);
    nn::Rng rng(1);
    for (int trial = 0; trial < 200; ++trial) {
      const Tensor x0 = nn::rand_uniform({1}, rng, -1.0, 1.0);
      const Tensor eps = nn::randn({1}, rng);
      const int k = 1 + trial * 5;
      double ab = 1.0;
      for (int j = 1; j <= k; ++j) ab *= 1.0 - (1e-4 + (0.02 - 1e-4) * (j - 1) / 999.0);
      const double expect = std::sqrt(ab) * x0[0] + std::sqrt(1.0 - ab) * eps[0];
      const DiffusionState st = forward_noise(s, x0, k, eps);
      CHECK(st.x_k[0] == doctest::Approx(expect).epsilon(1e-12));
      CHECK(st.k == k);
    }
  }

  TEST_CASE("zero noise scales the clean target") {
    const NoiseSchedule s = NoiseSchedule::linear(50);
    nn::Rng rng(2);
    const Tensor x0 = nn::rand_uniform({2, 3}, rng, -1.0, 1.0);
    const DiffusionState st = forward_noise(s, x0, 17, Tensor({2, 3}, 0.0));
    for (int i = 0; i < 6; ++i) CHECK(st.x_k[i] == std::sqrt(s.alpha_bar(17)) * x0[i]);
  }

  TEST_CASE("forward noising validates step and shape") {
    const NoiseSchedule s = NoiseSchedule::linear(10);
    const Tensor x0({4}, 0.5);
    CHECK_THROWS_AS(forward_noise(s, x0, 0, x0), ConfigError);
    CHECK_THROWS_AS(forward_noise(s, x0, 11, x0), ConfigError);
    CHECK_THROWS_AS(forward_noise(s, x0, 3, Tensor({5})), ShapeError);
  }

  TEST_CASE("toy schedule at k=K is close to a standard normal") {
    const NoiseSchedule s = NoiseSchedule::linear(200, 5e-4, 0.1);
    nn::Rng rng(3);
    const Tensor x0 = nn::rand_uniform({16}, rng, -1.0, 1.0);
    std::vector<testkit::RunningMoments> m(16);
    for (int n = 0; n < 10000; ++n) {
      const Tensor xk = forward_noise(s, x0, 200, nn::randn({16}, rng)).x_k;
      for (int i = 0; i < 16; ++i) m[static_cast<std::size_t>(i)].add(xk[i]);
    }
    for (const auto& mo : m) {
      CHECK(std::abs(mo.mean()) < 0.05);
      CHECK(std::abs(mo.variance() - 1.0) < 0.1);
    }
  }

  TEST_CASE("DDPM with a zero predictor and zero draws follows the hand-computed chain") {
    const NoiseSchedule s = NoiseSchedule::linear(3);
    // betas 1e-4, 0.01005, 0.02: x_{k-1} = x_k / sqrt(1 - beta_k).
    const double expect = 1.0 / std::sqrt((1.0 - 1e-4) * (1.0 - 0.01005) * (1.0 - 0.02));
    CHECK(s.beta(2) == doctest::Approx(0.01005).epsilon(1e-14));
    Tensor x_K({2}, 0.0);
    x_K[0] = 1.0;
    x_K[1] = -0.5;
    int draws = 0;
    const Tensor out = sample_ddpm(zero_predictor(), s, x_K, [&](int, const nn::Shape& sh) {
      ++draws;
      return Tensor(sh, 0.0);
    });
    CHECK(draws == 2);
    CHECK(out[0] == doctest::Approx(expect).epsilon(1e-14));
    CHECK(out[1] == doctest::Approx(-0.5 * expect).epsilon(1e-14));
  }

  TEST_CASE("DDPM is reproducible for a fixed seed and keeps the shape") {
    const NoiseSchedule s = NoiseSchedule::linear(20, 1e-3, 0.2);
    const auto pred = gaussian_oracle(s, 0.2, 0.3);
    nn::Rng r1(9), r2(9);
    const Tensor a = sample_ddpm(pred, s, {3, 2, 5, 5}, r1);
    const Tensor b = sample_ddpm(pred, s, {3, 2, 5, 5}, r2);
    CHECK(a.shape() == nn::Shape{3, 2, 5, 5});
    CHECK(a.identical(b));
  }

  TEST_CASE("DDIM timesteps are evenly spaced and end at K") {
    std::vector<int> every_fourth;
    for (int i = 1; i <= 50; ++i) every_fourth.push_back(4 * i);
    CHECK(ddim_timesteps(200, 50) == every_fourth);
    CHECK(ddim_timesteps(10, 3) == std::vector<int>{3, 6, 10});
    CHECK(ddim_timesteps(5, 1) == std::vector<int>{5});
    CHECK_THROWS_AS(ddim_timesteps(10, 11), ConfigError);
    CHECK_THROWS_AS(ddim_timesteps(10, 0), ConfigError);
  }

  TEST_CASE("DDIM with eta 0 is a pure function of x_K") {
    const NoiseSchedule s = NoiseSchedule::linear(100, 1e-3, 0.1);
    const auto pred = gaussian_oracle(s, -0.1, 0.4);
    nn::Rng rng(4);
    const Tensor x_K = nn::randn({2, 3, 6, 6}, rng);
    DdimOptions o;
    o.steps = 25;
    const Tensor a = sample_ddim(pred, s, x_K, o);
    const Tensor b = sample_ddim(pred, s, x_K, o);
    CHECK(a.identical(b));
    CHECK(a.shape() == x_K.shape());
  }

  TEST_CASE("DDIM with an exact single-point predictor recovers that point") {
    const NoiseSchedule s = NoiseSchedule::linear(200, 5e-4, 0.1);
    nn::Rng rng(5);
    const Tensor x0 = nn::rand_uniform({1, 1, 4, 4}, rng, -0.9, 0.9);
    DdimOptions o;
    const Tensor out = sample_ddim(point_oracle(s, x0), s, nn::randn({1, 1, 4, 4}, rng), o);
    CHECK(out.max_abs_diff(x0) < 1e-9);
  }

  TEST_CASE("DDIM with steps beyond K is a configuration error") {
    const NoiseSchedule s = NoiseSchedule::linear(10);
    DdimOptions o;
    o.steps = 11;
    CHECK_THROWS_AS(sample_ddim(zero_predictor(), s, Tensor({4}), o), ConfigError);
  }

  TEST_CASE("DDIM with one step jumps straight to the estimate") {
    const NoiseSchedule s = NoiseSchedule::linear(50);
    nn::Rng rng(6);
    const Tensor x_K = nn::randn({8}, rng);
    const auto pred = gaussian_oracle(s, 0.0, 0.5);
    DdimOptions o;
    o.steps = 1;
    o.clip_denoised = false;
    const Tensor out = sample_ddim(pred, s, x_K, o);
    CHECK(out.all_finite());
    const Tensor eps = pred(x_K, 50);
    const double ab = s.alpha_bar(50);
    for (int i = 0; i < 8; ++i)
      CHECK(out[i] == doctest::Approx((x_K[i] - std::sqrt(1.0 - ab) * eps[i]) / std::sqrt(ab))
                          .epsilon(1e-12));
  }

  TEST_CASE("clipping bounds the final estimate") {
    const NoiseSchedule s = NoiseSchedule::linear(50);
    nn::Rng rng(7);
    DdimOptions o;
    o.steps = 10;
    const Tensor out = sample_ddim(zero_predictor(), s, nn::randn({64}, rng, 5.0), o);
    for (std::int64_t i = 0; i < out.size(); ++i) CHECK(std::abs(out[i]) <= 1.0 + 1e-12);
  }

  TEST_CASE("DDIM with eta > 0 requires a noise source") {
    const NoiseSchedule s = NoiseSchedule::linear(10);
    DdimOptions o;
    o.steps = 5;
    o.eta = 1.0;
    CHECK_THROWS_AS(sample_ddim(zero_predictor(), s, Tensor({4}), o), ConfigError);
  }

  TEST_CASE("DDIM with eta 1 over all steps agrees with DDPM in per-pixel statistics") {
    const NoiseSchedule s = NoiseSchedule::linear(50, 1e-3, 0.2);
    const double mu = 0.3, sd = 0.2;
    const auto pred = gaussian_oracle(s, mu, sd);
    nn::Rng r1(11), r2(12);
    const Tensor a = sample_ddpm(pred, s, {256, 4}, r1);
    DdimOptions o;
    o.steps = 50;
    o.eta = 1.0;
    o.clip_denoised = false;
    const Tensor b = sample_ddim(pred, s, nn::randn({256, 4}, r2), o, gaussian_source(r2));
    for (int px = 0; px < 4; ++px) {
      testkit::RunningMoments ma, mb;
      for (int n = 0; n < 256; ++n) {
        ma.add(a[n * 4 + px]);
        mb.add(b[n * 4 + px]);
      }
      CHECK(std::abs(ma.mean() - mb.mean()) < 0.1);
      CHECK(std::abs(std::sqrt(ma.variance()) - std::sqrt(mb.variance())) < 0.1);
      CHECK(std::abs(ma.mean() - mu) < 0.1);
      CHECK(std::abs(std::sqrt(mb.variance()) - sd) < 0.1);
    }
  }
}
