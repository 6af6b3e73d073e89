// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef TMCAST_NN_OPTIM_HPP
#define TMCAST_NN_OPTIM_HPP

#include <vector>

#include "tmcast/nn/autograd.hpp"

namespace tmcast::nn {

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Adam with decoupled weight decay. Parameters without a gradient are
/// skipped entirely (no decay, no moment update).
class AdamW {
 public:
  AdamW(std::vector<Var> params, AdamWOptions options);
  void step(double learning_rate);
  void zero_grad();
  long steps() const noexcept { return steps_; }

 private:
  std::vector<Var> params_;
  AdamWOptions options_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  long steps_ = 0;
};

/// Cosine annealing from `base` at epoch 0 towards `floor` at `total_epochs`.
double cosine_learning_rate(double base, double floor, int epoch, int total_epochs);

}  // namespace tmcast::nn

#endif  // TMCAST_NN_OPTIM_HPP
