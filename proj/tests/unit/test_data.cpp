// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "tmcast/data.hpp"
#include "tmcast/error.hpp"
#include "tmcast/training.hpp"

using namespace tmcast;
using namespace tmcast::data;

TEST_SUITE("data") {
  TEST_CASE("canonical file with three 2x2 records parses into three matrices") {
    std::istringstream in("N=2 interval=300\n1 2 3 4\n5 6 7 8\n0 0 0 1.5\n");
    const auto s = parse_canonical(in);
    CHECK(s.node_count == 2);
    CHECK(s.interval_seconds == 300);
    REQUIRE(s.length() == 3);
    CHECK(s.matrices[1] == Matrix{5, 6, 7, 8});
    CHECK(s.matrices[2][3] == 1.5);
  }

  TEST_CASE("record with the wrong value count is a parse error naming the line") {
    std::istringstream in("N=2 interval=300\n1 2 3 4\n1 2 3\n");
    try {
      parse_canonical(in);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
      CHECK(e.kind() == ErrorKind::data);
    }
  }

  TEST_CASE("negative or non-finite entries are validation errors") {
    std::istringstream neg("N=2 interval=300\n1 2 -1.0 4\n");
    CHECK_THROWS_AS(parse_canonical(neg), ValidationError);
    std::istringstream nan("N=2 interval=300\n1 2 nan 4\n");
    CHECK_THROWS_AS(parse_canonical(nan), Error);
  }

  TEST_CASE("csv row-major import needs the node count and checks record width") {
    std::istringstream ok("1,2,3,4\n5,6,7,8\n");
    const auto s = parse_csv_rowmajor(ok, 2, 60);
    CHECK(s.length() == 2);
    CHECK(s.interval_seconds == 60);
    CHECK(s.matrices[1] == Matrix{5, 6, 7, 8});
    std::istringstream bad("1,2,3,4\n5,6,7\n");
    CHECK_THROWS_AS(parse_csv_rowmajor(bad, 2), ParseError);
    std::istringstream any("1,2,3,4\n");
    CHECK_THROWS_AS(parse_csv_rowmajor(any, 0), ConfigError);
  }

  TEST_CASE("canonical round trip is byte-for-byte") {
    const auto s = generate_synthetic(3, 20, 5, 0.1).series;
    std::ostringstream first;
    write_canonical(s, first);
    std::istringstream in(first.str());
    const auto back = parse_canonical(in);
    std::ostringstream second;
    write_canonical(back, second);
    CHECK(first.str() == second.str());
    CHECK(back.matrices == s.matrices);
  }

  TEST_CASE("missing file is a file error") {
    CHECK_THROWS_AS(load_series("/nonexistent/x.tm", SeriesFormat::canonical), FileError);
  }

  TEST_CASE("generator is deterministic given the seed") {
    const auto a = generate_synthetic(4, 100, 7, 0.05);
    const auto b = generate_synthetic(4, 100, 7, 0.05);
    CHECK(a.series.matrices == b.series.matrices);
    const auto c = generate_synthetic(4, 100, 8, 0.05);
    CHECK(a.series.matrices != c.series.matrices);
    a.series.validate();
  }

  TEST_CASE("burst rate zero emits no bursts and stays within the smooth envelope") {
    const auto s = generate_synthetic(4, 300, 3, 0.0);
    CHECK(s.bursts.empty());
    CHECK(s.burst_step_fraction() == 0.0);
    double mx = 0.0, sum = 0.0;
    std::size_t n = 0;
    for (const auto& m : s.series.matrices)
      for (double v : m) {
        mx = std::max(mx, v);
        sum += v;
        ++n;
      }
    CHECK(mx / (sum / static_cast<double>(n)) < 10.0);
  }

  TEST_CASE("burst fraction from the event log lies in [0.05, 0.2] at rate 0.1") {
    const auto s = generate_synthetic(6, 500, 1, 0.1);
    CHECK(!s.bursts.empty());
    const double f = s.burst_step_fraction();
    CHECK(f >= 0.05);
    CHECK(f <= 0.2);
    for (const auto& m : s.series.matrices)
      for (double v : m) CHECK(v >= 0.0);
  }

  TEST_CASE("generator preconditions") {
    CHECK_THROWS_AS(generate_synthetic(1, 10, 1, 0.1), ConfigError);
    CHECK_THROWS_AS(generate_synthetic(3, 0, 1, 0.1), ConfigError);
    CHECK_THROWS_AS(generate_synthetic(3, 10, 1, 1.5), ConfigError);
  }

  TEST_CASE("chronological split sizes follow the floor and remainder rule") {
    auto s100 = generate_synthetic(2, 100, 1, 0.0).series;
    auto sp = chronological_split(s100);
    CHECK(sp.train.length() == 70);
    CHECK(sp.validation.length() == 15);
    CHECK(sp.test.length() == 15);
    auto s101 = generate_synthetic(2, 101, 1, 0.0).series;
    sp = chronological_split(s101);
    CHECK(sp.train.length() == 70);
    CHECK(sp.validation.length() == 15);
    CHECK(sp.test.length() == 16);
    CHECK(sp.offsets[0] == 0);
    CHECK(sp.offsets[1] == 70);
    CHECK(sp.offsets[2] == 85);
    CHECK(sp.train.timestamp(sp.train.length() - 1) < sp.validation.timestamp(0));
    CHECK(sp.validation.timestamp(sp.validation.length() - 1) < sp.test.timestamp(0));
    CHECK(sp.test.matrices.front() == s101.matrices[85]);
  }

  TEST_CASE("split of a length-2 series is a configuration error") {
    auto s = generate_synthetic(2, 2, 1, 0.0).series;
    CHECK_THROWS_AS(chronological_split(s), ConfigError);
    auto s10 = generate_synthetic(2, 10, 1, 0.0).series;
    CHECK_THROWS_AS(chronological_split(s10, {0.5, 0.2, 0.2}), ConfigError);
  }

  TEST_CASE("window counts") {
    CHECK(window_origins(30, 24, 1, 1).size() == 6);
    CHECK(window_origins(44, 24, 20, 1).size() == 1);
    const auto w = window_origins(40, 24, 10, 2);
    CHECK(w.size() == 4);
    // Brute-force enumeration of valid offsets.
    std::vector<std::size_t> brute;
    for (std::size_t o = 0; o + 24 + 10 <= 40; o += 2) brute.push_back(o);
    CHECK(w == brute);
    CHECK_THROWS_AS(window_origins(30, 24, 10, 1), ConfigError);
  }

  TEST_CASE("windows are contiguous with the target right after the input") {
    const auto s = generate_synthetic(2, 12, 4, 0.0).series;
    const auto ws = make_windows(s, 3, 2, 2);
    REQUIRE(ws.size() == 4);
    for (const auto& w : ws) {
      CHECK(w.input_window.size() == 3);
      CHECK(w.target_window.size() == 2);
      CHECK(w.input_window.front() == s.matrices[w.origin_index]);
      CHECK(w.target_window.front() == s.matrices[w.origin_index + 3]);
    }
  }

  TEST_CASE("windowing never crosses split boundaries") {
    const auto s = generate_synthetic(3, 120, 2, 0.05).series;
    const auto bundle = train::prepare_data(s, image::ImageMode::rgb, 8, 2, {0.7, 0.15, 0.15}, 1, 0);
    const std::size_t train_len = bundle.split.train.length();
    for (std::size_t o : bundle.train_origins) CHECK(o + 8 + 2 <= train_len);
    for (std::size_t o : bundle.validation_origins)
      CHECK(o + 8 + 2 <= bundle.split.validation.length());
    for (std::size_t o : bundle.test_origins) CHECK(o + 8 + 2 <= bundle.split.test.length());
    CHECK(bundle.train.frames.size() == train_len);
  }
}
