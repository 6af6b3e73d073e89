// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef TMCAST_DATA_HPP
#define TMCAST_DATA_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

// Traffic-matrix series: ingest, synthesis, chronological splitting and
// sliding windows.
namespace tmcast::data {

/// Row-major N x N demand matrix.
using Matrix = std::vector<double>;

struct TrafficMatrixSeries {
  int node_count = 0;
  int interval_seconds = 300;
  std::vector<Matrix> matrices;
  /// Optional; empty means index * interval_seconds.
  std::vector<std::int64_t> timestamps;

  std::size_t length() const noexcept { return matrices.size(); }
  std::int64_t timestamp(std::size_t t) const;
  /// Contiguous sub-range [begin, begin + count).
  TrafficMatrixSeries slice(std::size_t begin, std::size_t count) const;
  /// Throws ValidationError on any violated invariant.
  void validate() const;
};

enum class SeriesFormat { canonical, csv_rowmajor };

/// `nodes` is required for csv_rowmajor and ignored for canonical files.
TrafficMatrixSeries load_series(const std::filesystem::path& path, SeriesFormat format,
                                int nodes = 0, int interval_seconds = 300);
TrafficMatrixSeries parse_canonical(std::istream& in);
TrafficMatrixSeries parse_csv_rowmajor(std::istream& in, int nodes, int interval_seconds = 300);

/// Header `N=<int> interval=<int>`, then one matrix per line as N*N
/// space-separated shortest round-trip decimals.
void write_canonical(const TrafficMatrixSeries& series, std::ostream& out);
void save_canonical(const TrafficMatrixSeries& series, const std::filesystem::path& path);

struct BurstEvent {
  int start = 0;
  int duration = 1;
  int row = 0;
  int col = 0;
  double magnitude = 1.0;
};

struct SyntheticOptions {
  int interval_seconds = 300;
  int period_steps = 288;  // one day at 5-minute resolution
  double noise_scale = 0.08;
  double noise_correlation = 0.9;
};

struct SyntheticSeries {
  TrafficMatrixSeries series;
  std::vector<BurstEvent> bursts;  // generator event log

  /// Fraction of timesteps covered by at least one burst.
  double burst_step_fraction() const;
};

/// Diurnal sinusoid per origin-destination pair, AR(1) multiplicative noise,
/// and Bernoulli-timed multiplicative bursts. Deterministic given the seed.
SyntheticSeries generate_synthetic(int node_count, int length, std::uint64_t seed,
                                   double burst_rate, const SyntheticOptions& options = {});

struct DatasetSplit {
  TrafficMatrixSeries train;
  TrafficMatrixSeries validation;
  TrafficMatrixSeries test;
  std::array<double, 3> ratios{};
  /// Start index of each slice in the source series.
  std::array<std::size_t, 3> offsets{};
};

/// floor(r_train * T), floor(r_val * T), remainder to test; no shuffling.
DatasetSplit chronological_split(const TrafficMatrixSeries& series,
                                 std::array<double, 3> ratios = {0.7, 0.15, 0.15});

struct WindowedSample {
  std::vector<Matrix> input_window;
  std::vector<Matrix> target_window;
  std::size_t origin_index = 0;
};

/// Start offsets of every full (input, target) window.
std::vector<std::size_t> window_origins(std::size_t length, int input_length,
                                        int output_length, int stride = 1);
std::vector<WindowedSample> make_windows(const TrafficMatrixSeries& series, int input_length,
                                         int output_length, int stride = 1);

}  // namespace tmcast::data

#endif  // TMCAST_DATA_HPP
