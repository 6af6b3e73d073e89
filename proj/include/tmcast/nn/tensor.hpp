// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef TMCAST_NN_TENSOR_HPP
#define TMCAST_NN_TENSOR_HPP

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace tmcast::nn {

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Dense row-major array of doubles. Owns its storage; copies are deep.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor({1}, v); }

  const Shape& shape() const noexcept { return shape_; }
  int rank() const noexcept { return static_cast<int>(shape_.size()); }
  /// Size of dimension i; negative i counts from the back.
  std::int64_t dim(int i) const;
  std::int64_t size() const noexcept { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const noexcept { return data_.empty(); }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  Tensor reshaped(Shape shape) const;
  void fill(double v);
  /// Bitwise-equal shape and contents.
  bool identical(const Tensor& other) const;
  bool all_finite() const;
  double max_abs_diff(const Tensor& other) const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

using Rng = std::mt19937_64;

Tensor randn(const Shape& shape, Rng& rng, double stddev = 1.0);
Tensor rand_uniform(const Shape& shape, Rng& rng, double lo, double hi);

}  // namespace tmcast::nn

#endif  // TMCAST_NN_TENSOR_HPP
