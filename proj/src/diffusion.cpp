// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#include "tmcast/diffusion.hpp"

#include <algorithm>
#include <cmath>

#include "tmcast/error.hpp"

namespace tmcast::diffusion {

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
  if (steps < 2) throw ConfigError("noise schedule needs at least 2 steps");
  if (!(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end))
    throw ConfigError("noise schedule betas must satisfy 0 < start <= end < 1");
  std::vector<double> betas(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i)
    betas[static_cast<std::size_t>(i)] =
        beta_start + (beta_end - beta_start) * static_cast<double>(i) / (steps - 1);
  return from_betas(std::move(betas));
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
  if (betas.size() < 2) throw ConfigError("noise schedule needs at least 2 steps");
  NoiseSchedule s;
  s.betas_ = std::move(betas);
  s.alpha_bars_.resize(s.betas_.size());
  double prod = 1.0;
  for (std::size_t i = 0; i < s.betas_.size(); ++i) {
    if (!(s.betas_[i] > 0.0 && s.betas_[i] < 1.0))
      throw ConfigError("noise schedule betas must lie in (0, 1)");
    prod *= 1.0 - s.betas_[i];
    s.alpha_bars_[i] = prod;
  }
  return s;
}

double NoiseSchedule::beta(int k) const {
  if (k < 1 || k > steps()) throw ConfigError("diffusion step " + std::to_string(k) + " outside 1.." +
                                              std::to_string(steps()));
  return betas_[static_cast<std::size_t>(k - 1)];
}

double NoiseSchedule::alpha_bar(int k) const {
  if (k == 0) return 1.0;
  if (k < 0 || k > steps()) throw ConfigError("diffusion step " + std::to_string(k) + " outside 0.." +
                                              std::to_string(steps()));
  return alpha_bars_[static_cast<std::size_t>(k - 1)];
}

DiffusionState forward_noise(const NoiseSchedule& schedule, const nn::Tensor& x0, int k,
                             const nn::Tensor& epsilon) {
  if (k < 1 || k > schedule.steps())
    throw ConfigError("forward_noise: step " + std::to_string(k) + " outside 1.." +
                      std::to_string(schedule.steps()));
  if (epsilon.shape() != x0.shape()) throw ShapeError("forward_noise: epsilon shape differs");
  const double a = std::sqrt(schedule.alpha_bar(k));
  const double b = std::sqrt(1.0 - schedule.alpha_bar(k));
  DiffusionState st;
  st.k = k;
  st.epsilon = epsilon;
  st.x_k = nn::Tensor(x0.shape());
  for (std::int64_t i = 0; i < x0.size(); ++i) st.x_k[i] = a * x0[i] + b * epsilon[i];
  return st;
}

nn::Tensor sample_ddpm(const NoisePredictor& predict, const NoiseSchedule& schedule,
                       nn::Tensor x, const NoiseSource& noise) {
  for (int k = schedule.steps(); k >= 1; --k) {
    const nn::Tensor eps = predict(x, k);
    if (eps.shape() != x.shape()) throw ShapeError("sample_ddpm: predictor changed shape");
    const double beta = schedule.beta(k);
    const double ab = schedule.alpha_bar(k);
    const double ab_prev = schedule.alpha_bar(k - 1);
    const double coef = beta / std::sqrt(1.0 - ab);
    const double inv_sqrt_alpha = 1.0 / std::sqrt(1.0 - beta);
    nn::Tensor next(x.shape());
    for (std::int64_t i = 0; i < x.size(); ++i) next[i] = inv_sqrt_alpha * (x[i] - coef * eps[i]);
    if (k > 1) {
      const double sigma = std::sqrt(beta * (1.0 - ab_prev) / (1.0 - ab));
      const nn::Tensor z = noise(k, x.shape());
      for (std::int64_t i = 0; i < x.size(); ++i) next[i] += sigma * z[i];
    }
    x = std::move(next);
  }
  return x;
}

nn::Tensor sample_ddpm(const NoisePredictor& predict, const NoiseSchedule& schedule,
                       const nn::Shape& shape, nn::Rng& rng) {
  return sample_ddpm(predict, schedule, nn::randn(shape, rng), gaussian_source(rng));
}

std::vector<int> ddim_timesteps(int total_steps, int sampling_steps) {
  if (sampling_steps < 1) throw ConfigError("DDIM needs at least one step");
  if (sampling_steps > total_steps)
    throw ConfigError("DDIM steps " + std::to_string(sampling_steps) +
                      " exceed schedule length " + std::to_string(total_steps));
  std::vector<int> ks;
  for (int i = 1; i <= sampling_steps; ++i)
    ks.push_back(static_cast<int>((static_cast<long>(i) * total_steps) / sampling_steps));
  return ks;
}

nn::Tensor sample_ddim(const NoisePredictor& predict, const NoiseSchedule& schedule,
                       nn::Tensor x, const DdimOptions& options, const NoiseSource& noise) {
  const auto ks = ddim_timesteps(schedule.steps(), options.steps);
  if (options.eta < 0.0) throw ConfigError("DDIM eta must be nonnegative");
  if (options.eta > 0.0 && !noise) throw ConfigError("DDIM with eta > 0 needs a noise source");
  for (int i = static_cast<int>(ks.size()) - 1; i >= 0; --i) {
    const int k = ks[static_cast<std::size_t>(i)];
    const int k_prev = i > 0 ? ks[static_cast<std::size_t>(i - 1)] : 0;
    const nn::Tensor eps = predict(x, k);
    if (eps.shape() != x.shape()) throw ShapeError("sample_ddim: predictor changed shape");
    const double ab = schedule.alpha_bar(k);
    const double ab_prev = schedule.alpha_bar(k_prev);
    const double sigma = options.eta * std::sqrt((1.0 - ab_prev) / (1.0 - ab)) *
                         std::sqrt(1.0 - ab / ab_prev);
    const double dir = std::sqrt(std::max(0.0, 1.0 - ab_prev - sigma * sigma));
    nn::Tensor z;
    if (sigma > 0.0) z = noise(k, x.shape());
    nn::Tensor next(x.shape());
    for (std::int64_t j = 0; j < x.size(); ++j) {
      double x0 = (x[j] - std::sqrt(1.0 - ab) * eps[j]) / std::sqrt(ab);
      double e = eps[j];
      if (options.clip_denoised && (x0 < -1.0 || x0 > 1.0)) {
        x0 = std::clamp(x0, -1.0, 1.0);
        // Keep the noise direction consistent with the clipped estimate.
        e = (x[j] - std::sqrt(ab) * x0) / std::sqrt(1.0 - ab);
      }
      next[j] = std::sqrt(ab_prev) * x0 + dir * e;
      if (sigma > 0.0) next[j] += sigma * z[j];
    }
    x = std::move(next);
  }
  return x;
}

NoiseSource gaussian_source(nn::Rng& rng) {
  return [&rng](int, const nn::Shape& shape) { return nn::randn(shape, rng); };
}

}  // namespace tmcast::diffusion
