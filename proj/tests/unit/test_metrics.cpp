// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numbers>

#include "tmcast/error.hpp"
#include "tmcast/metrics.hpp"
#include "tmcast/nn/tensor.hpp"

using namespace tmcast;
using namespace tmcast::eval;

TEST_SUITE("metrics") {
  TEST_CASE("identical matrices score zero") {
    const std::vector<double> a{0.1, 0.4, 0.9, 0.0};
    const Metrics m = compute_metrics(a, a);
    CHECK(m.mae == 0.0);
    CHECK(m.rmse == 0.0);
  }

  TEST_CASE("equal-magnitude residuals give equal MAE and RMSE") {
    const std::vector<double> truth{0.5, 0.5, 0.5, 0.5};
    const std::vector<double> pred{0.6, 0.4, 0.6, 0.4};
    const Metrics m = compute_metrics(pred, truth);
    CHECK(m.mae == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(m.rmse == doctest::Approx(0.1).epsilon(1e-12));
  }

  TEST_CASE("a single residual of 0.2 on a 2x2 grid") {
    const std::vector<double> truth{0.0, 0.0, 0.0, 0.0};
    const std::vector<double> pred{0.2, 0.0, 0.0, 0.0};
    const Metrics m = compute_metrics(pred, truth);
    CHECK(m.mae == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(m.rmse == doctest::Approx(0.1).epsilon(1e-12));
  }

  TEST_CASE("RMSE is never below MAE") {
    nn::Rng rng(1);
    for (int trial = 0; trial < 1000; ++trial) {
      const int n = 1 + trial % 7;
      const nn::Tensor a = nn::rand_uniform({n * n}, rng, 0.0, 1.0);
      const nn::Tensor b = nn::rand_uniform({n * n}, rng, 0.0, 1.0);
      const Metrics m = compute_metrics(a.values(), b.values());
      CHECK(m.mae >= 0.0);
      CHECK(m.rmse >= m.mae - 1e-15);
    }
  }

  TEST_CASE("mismatched, empty and non-finite inputs are rejected") {
    const std::vector<double> four(4, 0.0), nine(9, 0.0), none;
    CHECK_THROWS_AS(compute_metrics(four, nine), ShapeError);
    CHECK_THROWS_AS(compute_metrics(none, none), ShapeError);
    const std::vector<double> bad{0.0, NAN, 0.0, 0.0};
    CHECK_THROWS_AS(compute_metrics(bad, four), NumericError);
  }

  TEST_CASE("metric space divides intensities by 255") {
    image::ColorMatrix c;
    c.node_count = 2;
    c.values = {0.0, 51.0, 127.5, 255.0};
    const auto m = metric_space(c);
    CHECK(m == std::vector<double>{0.0, 0.2, 0.5, 1.0});
  }

  TEST_CASE("persistence repeats the last observed frame") {
    const std::vector<std::vector<double>> window{{0.1, 0.2}, {0.3, 0.4}, {0.5, 0.6}};
    const auto one = persistence_baseline(window, 1);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == window.back());
    const auto three = persistence_baseline(window, 3);
    for (const auto& f : three) CHECK(f == window.back());
    CHECK_THROWS_AS(persistence_baseline({}, 1), ConfigError);
  }

  TEST_CASE("persistence on a constant series has zero error at every horizon") {
    const std::vector<double> frame{0.3, 0.7, 0.1, 0.9};
    const std::vector<std::vector<double>> window(4, frame);
    for (const auto& p : persistence_baseline(window, 5)) {
      const Metrics m = compute_metrics(p, frame);
      CHECK(m.mae == 0.0);
      CHECK(m.rmse == 0.0);
    }
  }

  TEST_CASE("persistence on a three-step series matches hand computation") {
    // Frames at t = 0, 1, 2 on a 2x2 grid; input window {0, 1}, target t = 2.
    const std::vector<std::vector<double>> series{
        {0.0, 0.2, 0.4, 0.6}, {0.1, 0.3, 0.5, 0.7}, {0.4, 0.3, 0.5, 0.2}};
    const auto pred = persistence_baseline({series[0], series[1]}, 1);
    // Residuals: -0.3, 0, 0, 0.5.
    const Metrics m = compute_metrics(pred[0], series[2]);
    CHECK(m.mae == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(m.rmse == doctest::Approx(std::sqrt(0.34 / 4.0)).epsilon(1e-12));
  }

  TEST_CASE("persistence of a sinusoid at half its period") {
    // f_t(i) = 0.5 + 0.5 sin(2 pi t / P + phi_i): the half-period residual is
    // sin(2 pi t / P + phi_i), so with phases spread evenly over a full turn
    // RMSE = sqrt(1/2) and MAE = mean |sin|.
    const int period = 8, cells = 16;
    auto frame = [&](int t) {
      std::vector<double> f(cells);
      for (int i = 0; i < cells; ++i)
        f[static_cast<std::size_t>(i)] =
            0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * t / period +
                                 2.0 * std::numbers::pi * i / cells);
      return f;
    };
    double mean_abs = 0.0;
    for (int i = 0; i < cells; ++i)
      mean_abs += std::abs(std::sin(2.0 * std::numbers::pi * 3 / period +
                                    2.0 * std::numbers::pi * i / cells)) /
                  cells;
    const auto pred = persistence_baseline({frame(2), frame(3)}, period / 2);
    const Metrics m = compute_metrics(pred.back(), frame(3 + period / 2));
    CHECK(m.rmse == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
    CHECK(m.mae == doctest::Approx(mean_abs).epsilon(1e-12));
  }

  TEST_CASE("horizon accumulator averages per-matrix metrics") {
    HorizonAccumulator acc;
    CHECK(acc.mean().rmse == 0.0);
    acc.add({0.1, 0.2});
    acc.add({0.3, 0.6});
    CHECK(acc.count() == 2);
    CHECK(acc.mean().mae == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(acc.mean().rmse == doctest::Approx(0.4).epsilon(1e-15));
  }
}
