// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef TMCAST_TEST_HELPERS_HPP
#define TMCAST_TEST_HELPERS_HPP

#include <cstdlib>
#include <filesystem>
#include <string>

#include "tmcast/forecaster.hpp"

namespace tmcast::test {

/// Fresh per-test directory under TMCAST_TEST_SCRATCH (or the system temp).
inline std::filesystem::path scratch_dir(const std::string& name) {
  const char* root = std::getenv("TMCAST_TEST_SCRATCH");
  std::filesystem::path dir =
      root ? std::filesystem::path(root) : std::filesystem::temp_directory_path() / "tmcast_tests";
  dir /= name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Small but complete model for fast structural tests.
inline model::ModelConfig micro_model(model::Ablation ablation = model::Ablation::full,
                                      int nodes = 6, int t_in = 4, int t_out = 1) {
  model::ModelConfig c;
  c.node_count = nodes;
  c.input_length = t_in;
  c.output_length = t_out;
  c.vision.feature_dim = 8;
  c.vision.model_dim = 16;
  c.vision.residual_blocks = 1;
  c.vision.attention_kernel = 3;
  c.backbone.layers = 2;
  c.backbone.hidden_dim = 32;
  c.backbone.heads = 4;
  c.backbone.ffn_multiplier = 2;
  c.adapter.rank = 4;
  c.base_channels = 8;
  c.channel_mult = {1, 2};
  c.res_blocks = 1;
  c.max_groups = 4;
  c.diffusion_steps = 20;
  c.beta_start = 1e-3;
  c.beta_end = 0.2;
  c.ablation = ablation;
  return c;
}

inline bool bitwise_equal(const nn::Tensor& a, const nn::Tensor& b) { return a.identical(b); }

}  // namespace tmcast::test

#endif  // TMCAST_TEST_HELPERS_HPP
