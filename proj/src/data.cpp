// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#include "tmcast/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

#include "tmcast/error.hpp"

namespace tmcast::data {

std::int64_t TrafficMatrixSeries::timestamp(std::size_t t) const {
  if (!timestamps.empty()) return timestamps.at(t);
  return static_cast<std::int64_t>(t) * interval_seconds;
}

TrafficMatrixSeries TrafficMatrixSeries::slice(std::size_t begin, std::size_t count) const {
  if (begin + count > matrices.size()) throw ValidationError("slice outside series");
  TrafficMatrixSeries out;
  out.node_count = node_count;
  out.interval_seconds = interval_seconds;
  out.matrices.assign(matrices.begin() + static_cast<std::ptrdiff_t>(begin),
                      matrices.begin() + static_cast<std::ptrdiff_t>(begin + count));
  out.timestamps.reserve(count);
  for (std::size_t t = begin; t < begin + count; ++t) out.timestamps.push_back(timestamp(t));
  return out;
}

void TrafficMatrixSeries::validate() const {
  if (node_count < 1) throw ValidationError("node count must be positive");
  if (interval_seconds < 1) throw ValidationError("interval must be positive");
  if (matrices.empty()) throw ValidationError("series is empty");
  const std::size_t cells = static_cast<std::size_t>(node_count) * node_count;
  for (std::size_t t = 0; t < matrices.size(); ++t) {
    if (matrices[t].size() != cells)
      throw ValidationError("matrix " + std::to_string(t) + " has " +
                            std::to_string(matrices[t].size()) + " entries, expected " +
                            std::to_string(cells));
    for (double v : matrices[t]) {
      if (!std::isfinite(v))
        throw ValidationError("matrix " + std::to_string(t) + " has a non-finite entry");
      if (v < 0.0)
        throw ValidationError("matrix " + std::to_string(t) + " has a negative entry");
    }
  }
  if (!timestamps.empty()) {
    if (timestamps.size() != matrices.size())
      throw ValidationError("timestamp count differs from matrix count");
    for (std::size_t t = 1; t < timestamps.size(); ++t)
      if (timestamps[t] <= timestamps[t - 1])
        throw ValidationError("timestamps are not increasing at " + std::to_string(t));
  }
}

namespace {

std::vector<std::string_view> split_tokens(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    if (sep == ' ') {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
      if (i >= line.size()) break;
      std::size_t j = i;
      while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
      out.push_back(line.substr(i, j - i));
      i = j;
    } else {
      std::size_t j = line.find(sep, i);
      if (j == std::string_view::npos) j = line.size();
      auto tok = line.substr(i, j - i);
      while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t')) tok.remove_prefix(1);
      while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t')) tok.remove_suffix(1);
      out.push_back(tok);
      i = j + 1;
      if (j == line.size()) break;
    }
  }
  return out;
}

double parse_value(std::string_view tok, std::size_t line_no) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (!tok.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw ParseError(line_no, "cannot parse value '" + std::string(tok) + "'");
  if (!std::isfinite(v))
    throw ValidationError("line " + std::to_string(line_no) + ": non-finite value");
  if (v < 0.0)
    throw ValidationError("line " + std::to_string(line_no) + ": negative value " +
                          std::string(tok));
  return v;
}

int parse_int_field(std::string_view tok, std::string_view key, std::size_t line_no) {
  if (tok.substr(0, key.size()) != key)
    throw ParseError(line_no, "expected '" + std::string(key) + "<int>' in header");
  tok.remove_prefix(key.size());
  int v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || v < 1)
    throw ParseError(line_no, "invalid value for " + std::string(key));
  return v;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

TrafficMatrixSeries parse_canonical(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "missing header");
  strip_cr(line);
  auto header = split_tokens(line, ' ');
  if (header.size() != 2) throw ParseError(1, "header must be 'N=<int> interval=<int>'");
  TrafficMatrixSeries series;
  series.node_count = parse_int_field(header[0], "N=", 1);
  series.interval_seconds = parse_int_field(header[1], "interval=", 1);
  const std::size_t cells = static_cast<std::size_t>(series.node_count) * series.node_count;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    auto tokens = split_tokens(line, ' ');
    if (tokens.size() != cells)
      throw ParseError(line_no, "expected " + std::to_string(cells) + " values, found " +
                                    std::to_string(tokens.size()));
    Matrix m;
    m.reserve(cells);
    for (auto tok : tokens) m.push_back(parse_value(tok, line_no));
    series.matrices.push_back(std::move(m));
  }
  if (series.matrices.empty()) throw ValidationError("series has no matrices");
  series.validate();
  return series;
}

TrafficMatrixSeries parse_csv_rowmajor(std::istream& in, int nodes, int interval_seconds) {
  if (nodes < 1) throw ConfigError("csv import requires a positive node count");
  TrafficMatrixSeries series;
  series.node_count = nodes;
  series.interval_seconds = interval_seconds;
  const std::size_t cells = static_cast<std::size_t>(nodes) * nodes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    auto tokens = split_tokens(line, ',');
    if (tokens.size() != cells)
      throw ParseError(line_no, "expected " + std::to_string(cells) + " values, found " +
                                    std::to_string(tokens.size()));
    Matrix m;
    m.reserve(cells);
    for (auto tok : tokens) m.push_back(parse_value(tok, line_no));
    series.matrices.push_back(std::move(m));
  }
  if (series.matrices.empty()) throw ValidationError("series has no matrices");
  series.validate();
  return series;
}

TrafficMatrixSeries load_series(const std::filesystem::path& path, SeriesFormat format,
                                int nodes, int interval_seconds) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open " + path.string());
  if (format == SeriesFormat::canonical) return parse_canonical(in);
  return parse_csv_rowmajor(in, nodes, interval_seconds);
}

void write_canonical(const TrafficMatrixSeries& series, std::ostream& out) {
  series.validate();
  out << "N=" << series.node_count << " interval=" << series.interval_seconds << '\n';
  std::string line;
  char buf[64];
  for (const auto& m : series.matrices) {
    line.clear();
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (i) line.push_back(' ');
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), m[i]);
      line.append(buf, ptr);
    }
    line.push_back('\n');
    out << line;
  }
}

void save_canonical(const TrafficMatrixSeries& series, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError("cannot write " + path.string());
  write_canonical(series, out);
  if (!out) throw FileError("write failed for " + path.string());
}

double SyntheticSeries::burst_step_fraction() const {
  if (series.length() == 0) return 0.0;
  std::set<int> covered;
  for (const auto& b : bursts)
    for (int t = b.start; t < b.start + b.duration && t < static_cast<int>(series.length()); ++t)
      covered.insert(t);
  return static_cast<double>(covered.size()) / static_cast<double>(series.length());
}

SyntheticSeries generate_synthetic(int node_count, int length, std::uint64_t seed,
                                   double burst_rate, const SyntheticOptions& options) {
  if (node_count < 2) throw ConfigError("synthetic series needs at least 2 nodes");
  if (length < 1) throw ConfigError("synthetic series needs length >= 1");
  if (!(burst_rate >= 0.0 && burst_rate <= 1.0))
    throw ConfigError("burst rate must lie in [0, 1]");
  if (options.period_steps < 1) throw ConfigError("period must be positive");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int cells = node_count * node_count;

  std::vector<double> base(cells), amplitude(cells), phase(cells), noise(cells);
  for (int i = 0; i < cells; ++i) {
    base[i] = 10.0 * std::exp(0.8 * gauss(rng));
    amplitude[i] = 0.3 + 0.5 * unit(rng);
    phase[i] = 2.0 * std::numbers::pi * unit(rng);
    noise[i] = gauss(rng);
  }

  SyntheticSeries out;
  out.series.node_count = node_count;
  out.series.interval_seconds = options.interval_seconds;
  out.series.matrices.reserve(static_cast<std::size_t>(length));

  // Active multiplicative factor per cell from bursts still running.
  std::vector<double> burst_factor(cells, 1.0);
  std::vector<int> burst_left(cells, 0);
  const double rho = options.noise_correlation;
  const double innovation = std::sqrt(1.0 - rho * rho);
  const double omega = 2.0 * std::numbers::pi / options.period_steps;

  for (int t = 0; t < length; ++t) {
    if (burst_rate > 0.0 && unit(rng) < burst_rate) {
      BurstEvent ev;
      ev.start = t;
      ev.duration = 1 + static_cast<int>(unit(rng) < 0.5);
      ev.row = static_cast<int>(unit(rng) * node_count) % node_count;
      ev.col = static_cast<int>(unit(rng) * node_count) % node_count;
      ev.magnitude = 2.0 + 3.0 * unit(rng);
      const int cell = ev.row * node_count + ev.col;
      burst_factor[cell] = ev.magnitude;
      burst_left[cell] = ev.duration;
      out.bursts.push_back(ev);
    }
    data::Matrix m(cells);
    for (int i = 0; i < cells; ++i) {
      noise[i] = rho * noise[i] + innovation * gauss(rng);
      const double diurnal = 1.0 + amplitude[i] * std::sin(omega * t + phase[i]);
      double v = base[i] * diurnal * (1.0 + options.noise_scale * noise[i]);
      if (burst_left[i] > 0) {
        v *= burst_factor[i];
        if (--burst_left[i] == 0) burst_factor[i] = 1.0;
      }
      m[i] = v > 0.0 ? v : 0.0;
    }
    out.series.matrices.push_back(std::move(m));
  }
  return out;
}

DatasetSplit chronological_split(const TrafficMatrixSeries& series, std::array<double, 3> ratios) {
  if (series.length() < 3) throw ConfigError("series too short to split (need >= 3 matrices)");
  double total = 0.0;
  for (double r : ratios) {
    if (r < 0.0) throw ConfigError("split ratios must be nonnegative");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
  const auto length = static_cast<double>(series.length());
  // Nudge absorbs representation error such as 0.7 * 100 = 69.999...
  const auto n_train = static_cast<std::size_t>(std::floor(ratios[0] * length + 1e-9));
  const auto n_val = static_cast<std::size_t>(std::floor(ratios[1] * length + 1e-9));
  if (n_train + n_val > series.length()) throw ConfigError("split ratios exceed series length");
  const std::size_t n_test = series.length() - n_train - n_val;
  if (n_train == 0 || n_val == 0 || n_test == 0)
    throw ConfigError("split of " + std::to_string(series.length()) +
                      " matrices leaves an empty partition");
  DatasetSplit split;
  split.ratios = ratios;
  split.offsets = {0, n_train, n_train + n_val};
  split.train = series.slice(0, n_train);
  split.validation = series.slice(n_train, n_val);
  split.test = series.slice(n_train + n_val, n_test);
  return split;
}

std::vector<std::size_t> window_origins(std::size_t length, int input_length, int output_length,
                                        int stride) {
  if (input_length < 1 || output_length < 1 || stride < 1)
    throw ConfigError("window lengths and stride must be positive");
  const std::size_t span = static_cast<std::size_t>(input_length + output_length);
  if (length < span)
    throw ConfigError("series of length " + std::to_string(length) +
                      " is too short for windows of " + std::to_string(span));
  std::vector<std::size_t> out;
  for (std::size_t o = 0; o + span <= length; o += static_cast<std::size_t>(stride))
    out.push_back(o);
  return out;
}

std::vector<WindowedSample> make_windows(const TrafficMatrixSeries& series, int input_length,
                                         int output_length, int stride) {
  std::vector<WindowedSample> out;
  for (std::size_t o : window_origins(series.length(), input_length, output_length, stride)) {
    WindowedSample s;
    s.origin_index = o;
    const auto first = series.matrices.begin() + static_cast<std::ptrdiff_t>(o);
    s.input_window.assign(first, first + input_length);
    s.target_window.assign(first + input_length, first + input_length + output_length);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace tmcast::data
