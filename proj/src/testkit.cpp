// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#include "tmcast/testkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "tmcast/error.hpp"

namespace tmcast::testkit {

double relative_error(double ad, double fd, double floor) {
  return std::abs(ad - fd) / std::max({std::abs(ad), std::abs(fd), floor});
}

std::vector<double> finite_diff_grad(const std::function<double(const std::vector<double>&)>& f,
                                     std::vector<double> theta, double h) {
  if (!(h > 0.0)) throw ConfigError("finite_diff_grad: step must be positive");
  std::vector<double> grad(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double x = theta[i];
    theta[i] = x + h;
    const double fp = f(theta);
    theta[i] = x - h;
    const double fm = f(theta);
    theta[i] = x;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericError("finite_diff_grad: non-finite function value at coordinate " +
                         std::to_string(i));
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

std::string GradCheckReport::summary() const {
  std::ostringstream s;
  s << "max rel err " << max_relative_error << " (tol " << tolerance << ", h " << step << ", "
    << precision << ")";
  for (const auto& b : blocks) s << "\n  " << b.name << ": " << b.max_relative_error << " over " << b.checked;
  return s.str();
}

GradCheckReport grad_check(const std::function<nn::Var()>& loss,
                           const std::vector<std::pair<std::string, nn::Var>>& blocks,
                           double tolerance, double h, std::size_t max_per_block) {
  GradCheckReport report;
  report.tolerance = tolerance;
  report.step = h;
  for (const auto& [name, v] : blocks) {
    nn::Var p = v;
    p.zero_grad();
  }
  nn::Var l = loss();
  nn::backward(l);
  std::vector<nn::Tensor> analytic;
  for (const auto& [name, v] : blocks)
    analytic.push_back(v.has_grad() ? v.grad() : nn::Tensor(v.shape(), 0.0));

  nn::NoGradGuard no_grad;
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    nn::Var p = blocks[bi].second;
    nn::Tensor& w = p.mutable_value();
    const std::int64_t n = w.size();
    std::vector<std::int64_t> coords;
    if (max_per_block == 0 || static_cast<std::size_t>(n) <= max_per_block) {
      for (std::int64_t i = 0; i < n; ++i) coords.push_back(i);
    } else {
      for (std::size_t j = 0; j < max_per_block; ++j)
        coords.push_back(static_cast<std::int64_t>(j * static_cast<std::size_t>(n) / max_per_block));
    }
    std::vector<double> theta;
    for (auto c : coords) theta.push_back(w[c]);
    auto f = [&](const std::vector<double>& x) {
      for (std::size_t j = 0; j < coords.size(); ++j) w[coords[j]] = x[j];
      return loss().value()[0];
    };
    const auto fd = finite_diff_grad(f, theta, h);
    for (std::size_t j = 0; j < coords.size(); ++j) w[coords[j]] = theta[j];
    GradCheckBlock block;
    block.name = blocks[bi].first;
    block.checked = coords.size();
    for (std::size_t j = 0; j < coords.size(); ++j)
      block.max_relative_error = std::max(block.max_relative_error,
                                          relative_error(analytic[bi][coords[j]], fd[j]));
    report.max_relative_error = std::max(report.max_relative_error, block.max_relative_error);
    report.blocks.push_back(block);
  }
  return report;
}

bool causality_probe(const std::function<nn::Tensor(const nn::Tensor&)>& forward,
                     const nn::Tensor& input, int t, int in_axis, int out_axis, nn::Rng& rng) {
  auto strides = [](const nn::Shape& s, int axis) {
    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= s[static_cast<std::size_t>(i)];
    for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < s.size(); ++i) inner *= s[i];
    return std::pair{outer, inner};
  };
  const nn::Tensor base = forward(input);
  nn::Tensor perturbed = input;
  const auto len_in = input.dim(in_axis);
  const auto [outer_in, inner_in] = strides(input.shape(), in_axis);
  std::normal_distribution<double> normal;
  for (std::int64_t o = 0; o < outer_in; ++o)
    for (std::int64_t p = t + 1; p < len_in; ++p)
      for (std::int64_t i = 0; i < inner_in; ++i)
        perturbed[(o * len_in + p) * inner_in + i] = normal(rng);
  const nn::Tensor probe = forward(perturbed);
  if (probe.shape() != base.shape()) return false;
  const auto len_out = base.dim(out_axis);
  const auto [outer_out, inner_out] = strides(base.shape(), out_axis);
  for (std::int64_t o = 0; o < outer_out; ++o)
    for (std::int64_t p = 0; p <= std::min<std::int64_t>(t, len_out - 1); ++p)
      for (std::int64_t i = 0; i < inner_out; ++i) {
        const std::int64_t idx = (o * len_out + p) * inner_out + i;
        if (std::memcmp(base.data() + idx, probe.data() + idx, sizeof(double)) != 0) return false;
      }
  return true;
}

std::vector<SectionCensus> param_census(const nn::ParamStore& store) {
  std::vector<SectionCensus> out;
  for (const std::string& s : store.sections()) out.push_back({s, 0, 0});
  for (const auto& e : store.entries()) {
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& c) { return c.section == e.section; });
    const auto n = static_cast<std::size_t>(e.var.value().size());
    if (e.trainable)
      it->trainable += n;
    else
      it->frozen += n;
  }
  return out;
}

std::size_t total_trainable(const std::vector<SectionCensus>& census) {
  std::size_t n = 0;
  for (const auto& c : census) n += c.trainable;
  return n;
}

const SectionCensus* find_section(const std::vector<SectionCensus>& census,
                                  const std::string& section) {
  for (const auto& c : census)
    if (c.section == section) return &c;
  return nullptr;
}

void RunningMoments::add(double x) {
  ++n_;
  const double d = x - mean_;
  mean_ += d / static_cast<double>(n_);
  m2_ += d * (x - mean_);
}

}  // namespace tmcast::testkit
