// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef TMCAST_DIFFUSION_HPP
#define TMCAST_DIFFUSION_HPP

#include <functional>
#include <vector>

#include "tmcast/nn/tensor.hpp"

// Noise schedule, closed-form forward noising, and the DDPM / DDIM reverse
// samplers. Steps are 1-based: k = 1..K, with alpha_bar(0) = 1.
namespace tmcast::diffusion {

enum class ScheduleKind { linear };

class NoiseSchedule {
 public:
  /// Betas evenly spaced from beta_start to beta_end inclusive.
  static NoiseSchedule linear(int steps, double beta_start = 1e-4, double beta_end = 0.02);
  /// Rebuilds from an explicit beta array (bit-exact checkpoint reload).
  static NoiseSchedule from_betas(std::vector<double> betas);

  int steps() const noexcept { return static_cast<int>(betas_.size()); }
  double beta(int k) const;
  double alpha(int k) const { return 1.0 - beta(k); }
  double alpha_bar(int k) const;
  const std::vector<double>& betas() const noexcept { return betas_; }
  const std::vector<double>& alpha_bars() const noexcept { return alpha_bars_; }

 private:
  std::vector<double> betas_;
  std::vector<double> alpha_bars_;
};

struct DiffusionState {
  nn::Tensor x_k;
  int k = 0;
  nn::Tensor epsilon;
};

/// x_k = sqrt(alpha_bar_k) x_0 + sqrt(1 - alpha_bar_k) eps.
DiffusionState forward_noise(const NoiseSchedule& schedule, const nn::Tensor& x0, int k,
                             const nn::Tensor& epsilon);

/// Predicted noise for a batch x_k at step k.
using NoisePredictor = std::function<nn::Tensor(const nn::Tensor& x_k, int k)>;
/// Fresh standard-normal draw used at the transition out of step k.
using NoiseSource = std::function<nn::Tensor(int k, const nn::Shape& shape)>;

/// Ancestral sampling from x_K down to x_0 with the posterior variance
/// beta_tilde; K predictor evaluations.
nn::Tensor sample_ddpm(const NoisePredictor& predict, const NoiseSchedule& schedule,
                       nn::Tensor x_K, const NoiseSource& noise);
nn::Tensor sample_ddpm(const NoisePredictor& predict, const NoiseSchedule& schedule,
                       const nn::Shape& shape, nn::Rng& rng);

struct DdimOptions {
  int steps = 50;
  double eta = 0.0;
  bool clip_denoised = true;  // clamp the x_0 estimate to [-1, 1]
};

/// Evenly spaced subsequence k_i = floor(i * K / S), i = 1..S.
std::vector<int> ddim_timesteps(int total_steps, int sampling_steps);

/// DDIM over the subsequence; with eta = 0 the result is a pure function of
/// x_K and the predictor. `noise` is only consulted when eta > 0.
nn::Tensor sample_ddim(const NoisePredictor& predict, const NoiseSchedule& schedule,
                       nn::Tensor x_K, const DdimOptions& options,
                       const NoiseSource& noise = nullptr);

NoiseSource gaussian_source(nn::Rng& rng);

}  // namespace tmcast::diffusion

#endif  // TMCAST_DIFFUSION_HPP
