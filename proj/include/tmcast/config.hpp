// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef TMCAST_CONFIG_HPP
#define TMCAST_CONFIG_HPP

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tmcast/forecaster.hpp"
#include "tmcast/training.hpp"

namespace tmcast::config {

/// Nested JSON experiment configuration. Every document is a complete
/// preset overlaid with patches; unknown keys and type changes are
/// rejected, so a snapshot reloads to an equal value.
class ExperimentConfig {
 public:
  /// "toy" or "paper".
  static ExperimentConfig preset(std::string_view name);
  /// Base preset named by the document's "preset" key (default toy), then
  /// the document on top.
  static ExperimentConfig from_json(const nlohmann::json& doc);
  static ExperimentConfig load(const std::filesystem::path& path);

  /// Deep-merges a partial document.
  void merge(const nlohmann::json& patch);
  /// Dotted-key override; the value is parsed as JSON, falling back to a
  /// plain string.
  void set(std::string_view key, std::string_view value);
  void set(std::string_view key, const char* value) { set(key, std::string_view(value)); }
  void set(std::string_view key, const nlohmann::json& value);
  /// Applies every override, then validates once, so cross-field limits
  /// see the final values. All or nothing.
  void set_many(const std::vector<std::pair<std::string, std::string>>& overrides);
  const nlohmann::json& get(std::string_view key) const;

  const nlohmann::json& document() const noexcept { return doc_; }
  std::string dump() const { return doc_.dump(2) + "\n"; }
  bool operator==(const ExperimentConfig& other) const { return doc_ == other.doc_; }

  model::ModelConfig model_config(int node_count) const;
  train::TrainingConfig training() const;
  train::EvalOptions eval_options() const;
  model::Ablation ablation() const;
  std::uint64_t seed() const;
  bool deterministic() const;
  std::array<double, 3> split_ratios() const;
  /// output_dir, resolved against TMCAST_OUTPUT_ROOT when relative.
  std::filesystem::path output_dir() const;

 private:
  void validate() const;
  nlohmann::json doc_;
};

}  // namespace tmcast::config

#endif  // TMCAST_CONFIG_HPP
