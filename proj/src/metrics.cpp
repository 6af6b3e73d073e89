// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#include "tmcast/metrics.hpp"

#include <cmath>
#include <string>

#include "tmcast/error.hpp"

namespace tmcast::eval {

Metrics compute_metrics(std::span<const double> prediction, std::span<const double> truth) {
  if (prediction.size() != truth.size())
    throw ShapeError("compute_metrics: prediction has " + std::to_string(prediction.size()) +
                     " values, truth has " + std::to_string(truth.size()));
  if (prediction.empty()) throw ShapeError("compute_metrics: empty matrices");
  double abs_sum = 0.0, sq_sum = 0.0;
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const double r = prediction[i] - truth[i];
    if (!std::isfinite(r)) throw NumericError("compute_metrics: non-finite value");
    abs_sum += std::abs(r);
    sq_sum += r * r;
  }
  const auto n = static_cast<double>(prediction.size());
  return {abs_sum / n, std::sqrt(sq_sum / n)};
}

std::vector<double> metric_space(const image::ColorMatrix& color) {
  std::vector<double> out(color.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = color.values[i] / 255.0;
  return out;
}

std::vector<double> metric_space(std::span<const double> normalized_plane, int node_count,
                                 image::DecodeStats* stats) {
  return metric_space(image::decode_intensity(normalized_plane, node_count, stats));
}

std::vector<std::vector<double>> persistence_baseline(
    const std::vector<std::vector<double>>& input_window, int horizons) {
  if (input_window.empty()) throw ConfigError("persistence baseline: empty input window");
  if (horizons < 1) throw ConfigError("persistence baseline: horizons must be >= 1");
  return std::vector<std::vector<double>>(static_cast<std::size_t>(horizons), input_window.back());
}

void HorizonAccumulator::add(const Metrics& m) {
  mae.push_back(m.mae);
  rmse.push_back(m.rmse);
}

Metrics HorizonAccumulator::mean() const {
  if (mae.empty()) return {};
  Metrics m;
  for (std::size_t i = 0; i < mae.size(); ++i) {
    m.mae += mae[i];
    m.rmse += rmse[i];
  }
  m.mae /= static_cast<double>(mae.size());
  m.rmse /= static_cast<double>(rmse.size());
  return m;
}

}  // namespace tmcast::eval
