// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#include "tmcast/report.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "tmcast/error.hpp"

namespace tmcast::report {

void write_gray_png(const std::filesystem::path& path, int width, int height,
                    const std::vector<std::uint8_t>& pixels) {
  if (width < 1 || height < 1 ||
      pixels.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    throw ShapeError("write_gray_png: pixel count does not match " + std::to_string(width) + "x" +
                     std::to_string(height));
  FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw IoError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("failed writing PNG " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y)
    png_write_row(png, pixels.data() + static_cast<std::size_t>(y) * static_cast<std::size_t>(width));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fclose(fp) != 0) throw IoError("failed closing " + path.string());
}

void write_heatmap_pair(const std::filesystem::path& path, const std::vector<double>& predicted,
                        const std::vector<double>& truth, int node_count, int cell) {
  const auto plane = static_cast<std::size_t>(node_count) * static_cast<std::size_t>(node_count);
  if (predicted.size() != plane || truth.size() != plane)
    throw ShapeError("write_heatmap_pair: planes must be N x N");
  const int panel = node_count * cell;
  const int width = 2 * panel + cell;
  const int height = panel;
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(width) * height, 255);
  auto paint = [&](const std::vector<double>& values, int x0) {
    for (int r = 0; r < node_count; ++r)
      for (int c = 0; c < node_count; ++c) {
        const double v = std::clamp(values[static_cast<std::size_t>(r * node_count + c)], 0.0, 1.0);
        const auto g = static_cast<std::uint8_t>(std::lround(v * 255.0));
        for (int dy = 0; dy < cell; ++dy)
          for (int dx = 0; dx < cell; ++dx)
            pixels[static_cast<std::size_t>(r * cell + dy) * width + x0 + c * cell + dx] = g;
      }
  };
  paint(predicted, 0);
  paint(truth, panel + cell);
  write_gray_png(path, width, height, pixels);
}

namespace {

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

}  // namespace

void write_bar_chart_svg(const std::filesystem::path& path, const std::string& title,
                         const std::vector<Bar>& bars) {
  std::vector<std::string> groups, labels;
  for (const Bar& b : bars) {
    if (std::find(groups.begin(), groups.end(), b.group) == groups.end()) groups.push_back(b.group);
    if (std::find(labels.begin(), labels.end(), b.label) == labels.end()) labels.push_back(b.label);
  }
  double vmax = 0.0;
  for (const Bar& b : bars) vmax = std::max(vmax, b.value);
  if (vmax <= 0.0) vmax = 1.0;

  static const char* kColors[] = {"#3b6ea5", "#d9822b", "#5a9e4b", "#b5443c", "#7d5ba6", "#8c8c8c"};
  const int bar_w = 22, gap = 18, left = 60, top = 40, plot_h = 220;
  const int group_w = static_cast<int>(labels.size()) * bar_w + gap;
  const int width = left + static_cast<int>(groups.size()) * group_w + 160;
  const int height = top + plot_h + 50;

  std::ostringstream svg;
  svg.precision(6);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<text x=\"" << left << "\" y=\"20\" font-size=\"14\">" << escape_xml(title)
      << "</text>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\""
      << width - 150 << "\" y2=\"" << top + plot_h << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"4\" y=\"" << top + 4 << "\">" << vmax << "</text>\n";
  for (const Bar& b : bars) {
    const auto gi = std::find(groups.begin(), groups.end(), b.group) - groups.begin();
    const auto li = std::find(labels.begin(), labels.end(), b.label) - labels.begin();
    const double h = std::max(0.0, b.value) / vmax * plot_h;
    const int x = left + static_cast<int>(gi) * group_w + static_cast<int>(li) * bar_w;
    svg << "<rect x=\"" << x << "\" y=\"" << top + plot_h - h << "\" width=\"" << bar_w - 2
        << "\" height=\"" << h << "\" fill=\"" << kColors[li % 6] << "\"><title>"
        << escape_xml(b.label + " " + b.group) << ": " << b.value << "</title></rect>\n";
  }
  for (std::size_t g = 0; g < groups.size(); ++g)
    svg << "<text x=\"" << left + static_cast<int>(g) * group_w << "\" y=\"" << top + plot_h + 16
        << "\">" << escape_xml(groups[g]) << "</text>\n";
  for (std::size_t l = 0; l < labels.size(); ++l) {
    const int y = top + 10 + static_cast<int>(l) * 16;
    svg << "<rect x=\"" << width - 140 << "\" y=\"" << y - 9 << "\" width=\"10\" height=\"10\" fill=\""
        << kColors[l % 6] << "\"/><text x=\"" << width - 124 << "\" y=\"" << y << "\">"
        << escape_xml(labels[l]) << "</text>\n";
  }
  svg << "</svg>\n";
  write_text(path, svg.str());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace tmcast::report
