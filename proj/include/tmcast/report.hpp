// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef TMCAST_REPORT_HPP
#define TMCAST_REPORT_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

// Static plot emission: PNG heatmaps and SVG bar charts.
namespace tmcast::report {

/// 8-bit grayscale PNG, row-major pixels.
void write_gray_png(const std::filesystem::path& path, int width, int height,
                    const std::vector<std::uint8_t>& pixels);

/// Predicted and true [0, 1] intensity planes side by side, each cell
/// scaled up to `cell` pixels, with a 1-cell gap between panels.
void write_heatmap_pair(const std::filesystem::path& path, const std::vector<double>& predicted,
                        const std::vector<double>& truth, int node_count, int cell = 16);

struct Bar {
  std::string group;  // e.g. "h=1"
  std::string label;  // e.g. "model", "persistence"
  double value = 0.0;
};

/// Grouped vertical bar chart.
void write_bar_chart_svg(const std::filesystem::path& path, const std::string& title,
                         const std::vector<Bar>& bars);

/// Writes text atomically enough for our purposes: to `path` directly,
/// throwing FileError on failure.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace tmcast::report

#endif  // TMCAST_REPORT_HPP
