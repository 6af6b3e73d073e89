// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef TMCAST_EXPERIMENT_HPP
#define TMCAST_EXPERIMENT_HPP

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "tmcast/config.hpp"
#include "tmcast/testkit.hpp"
#include "tmcast/training.hpp"

// Orchestration behind the CLI subcommands. Every run writes its artifacts
// into the configured output directory.
namespace tmcast::experiment {

namespace fs = std::filesystem;

/// The configured dataset file, or the synthetic generator when
/// data.path is empty.
data::TrafficMatrixSeries load_dataset(const config::ExperimentConfig& cfg);

/// Model for `cfg`, with the backbone loaded from an external checkpoint
/// when configured.
std::unique_ptr<model::Forecaster> build_model(const config::ExperimentConfig& cfg,
                                               int node_count);

train::DataBundle prepare(const config::ExperimentConfig& cfg,
                          const data::TrafficMatrixSeries& series);

/// Windows of the named split ("train", "validation", "test", "overfit").
std::pair<const model::EncodedSeries*, std::vector<std::size_t>> select_split(
    const train::DataBundle& data, const std::string& split);

struct TrainArtifacts {
  fs::path dir, checkpoint, log, snapshot;
  train::TrainingResult result;
  std::vector<testkit::SectionCensus> census;
};

TrainArtifacts run_train(const config::ExperimentConfig& cfg);

struct EvalRequest {
  fs::path checkpoint;
  std::string data_path;          // overrides the snapshot's data.path
  std::string split;              // empty: snapshot eval.split
  std::vector<int> horizons;      // empty: snapshot eval.horizons
  int num_samples = 0;            // 0: snapshot diffusion.num_samples
  bool dump_attention = false;
  fs::path out_dir;               // empty: beside the checkpoint
  bool plots = true;
};

struct EvalArtifacts {
  train::EvalReport report;
  fs::path report_path;
  std::vector<fs::path> plots;
};

EvalArtifacts run_eval(const EvalRequest& request);

nlohmann::json report_to_json(const train::EvalReport& report);

/// Per-section counts plus trainable and frozen totals.
nlohmann::json census_json(const std::vector<testkit::SectionCensus>& census);

struct AblationRow {
  std::string variant;
  bool ok = false;
  std::string error;
  std::vector<train::HorizonRow> metrics;  // model rows, one per horizon
  std::size_t trainable = 0;
  std::size_t frozen = 0;
};

struct AblationResult {
  std::vector<AblationRow> rows;
  fs::path report_path, table_path, chart_path;
  bool all_ok() const;
};

/// Trains and evaluates all six variants under one seed.
AblationResult run_ablate(const config::ExperimentConfig& cfg);

void run_synth(int nodes, int length, std::uint64_t seed, double burst_rate,
               const fs::path& out);

}  // namespace tmcast::experiment

#endif  // TMCAST_EXPERIMENT_HPP
