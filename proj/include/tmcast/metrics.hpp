// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef TMCAST_METRICS_HPP
#define TMCAST_METRICS_HPP

#include <span>
#include <vector>

#include "tmcast/traffic_image.hpp"

// Metrics live in [0, 1]: first-channel intensity divided by 255.
namespace tmcast::eval {

struct Metrics {
  double mae = 0.0;
  double rmse = 0.0;
};

/// Pixel-wise MAE and RMSE of one matrix pair.
Metrics compute_metrics(std::span<const double> prediction, std::span<const double> truth);

/// Intensity plane of a color matrix mapped to [0, 1].
std::vector<double> metric_space(const image::ColorMatrix& color);
/// Normalized [-1, 1] intensity plane mapped to [0, 1], clamping first.
std::vector<double> metric_space(std::span<const double> normalized_plane, int node_count,
                                 image::DecodeStats* stats = nullptr);

/// Repeats the last observed frame for every horizon.
std::vector<std::vector<double>> persistence_baseline(
    const std::vector<std::vector<double>>& input_window, int horizons);

/// Per-matrix records for one horizon, averaged afterwards.
struct HorizonAccumulator {
  std::vector<double> mae;
  std::vector<double> rmse;

  void add(const Metrics& m);
  Metrics mean() const;
  std::size_t count() const noexcept { return mae.size(); }
};

}  // namespace tmcast::eval

#endif  // TMCAST_METRICS_HPP
