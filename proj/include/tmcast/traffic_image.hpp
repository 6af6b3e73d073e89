// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef TMCAST_TRAFFIC_IMAGE_HPP
#define TMCAST_TRAFFIC_IMAGE_HPP

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "tmcast/data.hpp"

// Traffic-to-image encoding. A matrix becomes an inverted min-max intensity
// plane in [0, 255] (high traffic is dark); a sequence becomes 3-channel
// images of (intensity, first difference, second difference).
namespace tmcast::image {

struct ColorMatrix {
  int node_count = 0;
  std::vector<double> values;  // row-major, in [0, 255]
  double source_min = 0.0;
  double source_max = 0.0;
};

enum class ImageMode { rgb, grayscale };

int channel_count(ImageMode mode);

struct TrafficImage {
  int node_count = 0;
  /// Raw planes: intensity in [0, 255], differences in [-255, 255].
  std::vector<std::vector<double>> channels;
  /// The same planes mapped to [-1, 1] for model input.
  std::vector<std::vector<double>> normalized;

  int channel_count() const noexcept { return static_cast<int>(channels.size()); }
};

/// 255 * (1 - (x - min) / (max - min)); a constant matrix maps to 255.
ColorMatrix color_encode(const data::Matrix& matrix, int node_count);
std::vector<ColorMatrix> color_encode(const data::TrafficMatrixSeries& series);

std::vector<TrafficImage> image_encode(const std::vector<ColorMatrix>& frames, ImageMode mode);

// Intensity: 0 <-> -1, 255 <-> +1. Differences: d / 255.
inline double normalize_intensity(double v) { return v / 127.5 - 1.0; }
inline double denormalize_intensity(double u) { return (u + 1.0) * 127.5; }
inline double normalize_difference(double d) { return d / 255.0; }

struct DecodeStats {
  std::size_t clamped = 0;  // values outside [-1, 1] that were clamped
};

/// Inverse of the intensity normalization. Out-of-range inputs are clamped
/// and counted in `stats`.
ColorMatrix decode_intensity(std::span<const double> normalized_plane, int node_count,
                             DecodeStats* stats = nullptr);
ColorMatrix decode_intensity(const TrafficImage& image, DecodeStats* stats = nullptr);

/// 8-bit grayscale PNG of one raw channel; value = round(v) clamped to
/// [0, 255] (difference planes are shifted by +127.5 first).
void export_channel_png(const TrafficImage& image, int channel,
                        const std::filesystem::path& path);

}  // namespace tmcast::image

#endif  // TMCAST_TRAFFIC_IMAGE_HPP
