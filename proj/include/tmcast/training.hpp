// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef TMCAST_TRAINING_HPP
#define TMCAST_TRAINING_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tmcast/forecaster.hpp"
#include "tmcast/metrics.hpp"

namespace tmcast::train {

struct TrainingConfig {
  double learning_rate = 3e-5;
  double min_learning_rate = 0.0;
  int batch_size = 32;
  int max_epochs = 300;
  int early_stop_patience = 30;
  double weight_decay = 0.01;
  int accumulation_steps = 1;
  std::string lr_schedule = "cosine";  // or "constant"
  std::string precision = "fp64";
  long max_steps = 0;       // 0: no cap
  int overfit_samples = 0;  // > 0: train, validate and evaluate on the first n windows
  int validate_every = 1;   // epochs between validation passes
  std::uint64_t seed = 7;

  /// Throws ConfigError on any invalid field.
  void validate() const;
};

/// Windows of the three chronological splits, each encoded separately.
struct DataBundle {
  model::EncodedSeries train, validation, test;
  std::vector<std::size_t> train_origins, validation_origins, test_origins;
  std::vector<std::size_t> overfit_origins;  // subset of train_origins
  data::DatasetSplit split;
};

DataBundle prepare_data(const data::TrafficMatrixSeries& series, image::ImageMode mode,
                        int input_length, int output_length, std::array<double, 3> ratios,
                        int stride, int overfit_samples);

/// Stops once `patience` consecutive evaluations fail to improve on the best.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}
  /// Returns true when training should stop.
  bool update(double loss, int epoch);
  bool improved() const noexcept { return improved_; }
  double best() const noexcept { return best_; }
  int best_epoch() const noexcept { return best_epoch_; }
  int stale() const noexcept { return stale_; }

 private:
  int patience_;
  double best_ = 0.0;
  int best_epoch_ = -1;
  int stale_ = 0;
  bool improved_ = false;
};

double learning_rate_at(const TrainingConfig& config, int epoch);

struct TrainingResult {
  int epochs_run = 0;
  long steps = 0;
  int best_epoch = -1;
  double best_validation_loss = 0.0;
  bool early_stopped = false;
  std::vector<double> step_losses;
  std::vector<double> validation_losses;
};

/// One NDJSON record per call.
using LogSink = std::function<void(const std::string& line)>;

/// Mean L_diff over the windows, with a fixed noise stream so repeated
/// calls on the same weights agree exactly.
double validation_loss(const model::Forecaster& model, const model::EncodedSeries& series,
                       const std::vector<std::size_t>& origins, int batch_size,
                       std::uint64_t seed);

/// Cosine-annealed AdamW epochs with early stopping on validation L_diff.
/// The model ends holding the best-validation weights.
TrainingResult train(model::Forecaster& model, const DataBundle& data,
                     const TrainingConfig& config, const LogSink& log = nullptr);

struct HorizonRow {
  std::string predictor;  // "model" or "persistence"
  int horizon = 1;
  eval::Metrics mean;
  std::vector<double> sample_mae, sample_rmse;
};

struct EvalReport {
  std::string model_id;
  std::string ablation;
  std::string split;
  std::size_t windows = 0;
  std::vector<int> horizons;
  std::vector<HorizonRow> rows;
  std::size_t clamped = 0;
  std::vector<std::vector<double>> attention;  // per-window pooling weights
  // First window's predicted and true [0, 1] planes, one per horizon.
  std::vector<std::vector<double>> preview_prediction, preview_truth;
  long train_steps = 0;
  std::optional<double> wall_seconds;  // omitted in deterministic mode

  const HorizonRow& row(const std::string& predictor, int horizon) const;
};

struct EvalOptions {
  std::vector<int> horizons{1};
  model::SamplerOptions sampler;
  int batch_size = 16;
  bool dump_attention = false;
  std::uint64_t seed = 7;
  std::size_t max_windows = 0;  // 0: all
};

/// Forecasts every window and scores the model and the persistence baseline
/// per horizon in [0, 1] intensity space.
EvalReport evaluate(const model::Forecaster& model, const model::EncodedSeries& series,
                    const std::vector<std::size_t>& origins, const EvalOptions& options);

}  // namespace tmcast::train

#endif  // TMCAST_TRAINING_HPP
