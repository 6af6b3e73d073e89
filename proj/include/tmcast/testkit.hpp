// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef TMCAST_TESTKIT_HPP
#define TMCAST_TESTKIT_HPP

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "tmcast/nn/layers.hpp"

// Verification helpers shared by the tests and inspect-checkpoint.
namespace tmcast::testkit {

inline constexpr double kRelativeFloor = 1e-8;

/// |ad - fd| / max(|ad|, |fd|, floor).
double relative_error(double ad, double fd, double floor = kRelativeFloor);

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every
/// coordinate. Throws NumericError if f is non-finite at a probe point.
std::vector<double> finite_diff_grad(const std::function<double(const std::vector<double>&)>& f,
                                     std::vector<double> theta, double h = 1e-5);

struct GradCheckBlock {
  std::string name;
  std::size_t checked = 0;
  double max_relative_error = 0.0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::vector<GradCheckBlock> blocks;
  double tolerance = 0.0;
  double step = 1e-5;
  double floor = kRelativeFloor;
  std::string precision = "fp64";

  bool passed() const noexcept { return max_relative_error < tolerance; }
  std::string summary() const;
};

/// Compares reverse-mode gradients of `loss` against central differences of
/// the same scalar, perturbing parameter values in place. At most
/// `max_per_block` coordinates per block are probed (0 = all), chosen
/// evenly.
GradCheckReport grad_check(const std::function<nn::Var()>& loss,
                           const std::vector<std::pair<std::string, nn::Var>>& blocks,
                           double tolerance, double h = 1e-5, std::size_t max_per_block = 0);

/// Runs `forward` on `input`, then on a copy whose positions > t along
/// `in_axis` are replaced with fresh noise, and reports whether every output
/// position <= t along `out_axis` is bitwise unchanged.
bool causality_probe(const std::function<nn::Tensor(const nn::Tensor&)>& forward,
                     const nn::Tensor& input, int t, int in_axis, int out_axis, nn::Rng& rng);

struct SectionCensus {
  std::string section;
  std::size_t trainable = 0;
  std::size_t frozen = 0;
};

std::vector<SectionCensus> param_census(const nn::ParamStore& store);
std::size_t total_trainable(const std::vector<SectionCensus>& census);
const SectionCensus* find_section(const std::vector<SectionCensus>& census,
                                  const std::string& section);

/// Running mean and (population) variance.
class RunningMoments {
 public:
  void add(double x);
  std::size_t count() const noexcept { return n_; }
  double mean() const noexcept { return mean_; }
  double variance() const noexcept { return n_ > 0 ? m2_ / static_cast<double>(n_) : 0.0; }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

}  // namespace tmcast::testkit

#endif  // TMCAST_TESTKIT_HPP
