// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#include "tmcast/traffic_image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "tmcast/error.hpp"
#include "tmcast/report.hpp"

namespace tmcast::image {

int channel_count(ImageMode mode) { return mode == ImageMode::rgb ? 3 : 1; }

ColorMatrix color_encode(const data::Matrix& matrix, int node_count) {
  const std::size_t cells = static_cast<std::size_t>(node_count) * node_count;
  if (node_count < 1 || matrix.size() != cells)
    throw ShapeError("color_encode: expected " + std::to_string(cells) + " entries");
  for (double v : matrix)
    if (!std::isfinite(v)) throw ValidationError("color_encode: non-finite entry");
  ColorMatrix out;
  out.node_count = node_count;
  const auto [lo, hi] = std::minmax_element(matrix.begin(), matrix.end());
  out.source_min = *lo;
  out.source_max = *hi;
  out.values.resize(cells);
  const double range = out.source_max - out.source_min;
  for (std::size_t i = 0; i < cells; ++i)
    out.values[i] = range > 0.0 ? 255.0 * (1.0 - (matrix[i] - out.source_min) / range) : 255.0;
  return out;
}

std::vector<ColorMatrix> color_encode(const data::TrafficMatrixSeries& series) {
  std::vector<ColorMatrix> out;
  out.reserve(series.length());
  for (const auto& m : series.matrices) out.push_back(color_encode(m, series.node_count));
  return out;
}

std::vector<TrafficImage> image_encode(const std::vector<ColorMatrix>& frames, ImageMode mode) {
  if (frames.empty()) throw ShapeError("image_encode: empty frame list");
  const int n = frames.front().node_count;
  const std::size_t cells = static_cast<std::size_t>(n) * n;
  for (const auto& f : frames)
    if (f.node_count != n || f.values.size() != cells)
      throw ShapeError("image_encode: frames differ in size");

  std::vector<TrafficImage> out;
  out.reserve(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    TrafficImage img;
    img.node_count = n;
    const auto& cur = frames[t].values;
    img.channels.push_back(cur);
    if (mode == ImageMode::rgb) {
      std::vector<double> d1(cells), d2(cells);
      for (std::size_t i = 0; i < cells; ++i) {
        if (t == 0) {
          d1[i] = cur[i];
          d2[i] = cur[i];
        } else if (t == 1) {
          d1[i] = cur[i] - frames[0].values[i];
          d2[i] = d1[i];
        } else {
          const double prev = frames[t - 1].values[i];
          const double prev2 = frames[t - 2].values[i];
          d1[i] = cur[i] - prev;
          d2[i] = cur[i] - 2.0 * prev + prev2;
        }
      }
      img.channels.push_back(std::move(d1));
      img.channels.push_back(std::move(d2));
    }
    for (std::size_t c = 0; c < img.channels.size(); ++c) {
      std::vector<double> norm(cells);
      for (std::size_t i = 0; i < cells; ++i) {
        const double v = img.channels[c][i];
        // Second differences can reach +-510; only the model input is clamped.
        norm[i] = c == 0 ? normalize_intensity(v)
                         : std::clamp(normalize_difference(v), -1.0, 1.0);
      }
      img.normalized.push_back(std::move(norm));
    }
    out.push_back(std::move(img));
  }
  return out;
}

ColorMatrix decode_intensity(std::span<const double> normalized_plane, int node_count,
                             DecodeStats* stats) {
  const std::size_t cells = static_cast<std::size_t>(node_count) * node_count;
  if (normalized_plane.size() != cells) throw ShapeError("decode_intensity: plane size");
  ColorMatrix out;
  out.node_count = node_count;
  out.values.resize(cells);
  for (std::size_t i = 0; i < cells; ++i) {
    double u = normalized_plane[i];
    if (u < -1.0 || u > 1.0) {
      u = std::clamp(u, -1.0, 1.0);
      if (stats) ++stats->clamped;
    }
    out.values[i] = denormalize_intensity(u);
  }
  out.source_min = out.source_max = 0.0;  // not recoverable from the image
  return out;
}

ColorMatrix decode_intensity(const TrafficImage& image, DecodeStats* stats) {
  if (image.normalized.empty()) throw ShapeError("decode_intensity: no normalized planes");
  return decode_intensity(image.normalized.front(), image.node_count, stats);
}

void export_channel_png(const TrafficImage& image, int channel,
                        const std::filesystem::path& path) {
  if (channel < 0 || channel >= image.channel_count())
    throw ConfigError("channel " + std::to_string(channel) + " out of range");
  const auto& plane = image.channels[static_cast<std::size_t>(channel)];
  const bool shifted = channel > 0;
  std::vector<std::uint8_t> pixels(plane.size());
  for (std::size_t i = 0; i < plane.size(); ++i) {
    const double v = shifted ? plane[i] / 2.0 + 127.5 : plane[i];
    pixels[i] = static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
  }
  report::write_gray_png(path, image.node_count, image.node_count, pixels);
}

}  // namespace tmcast::image
