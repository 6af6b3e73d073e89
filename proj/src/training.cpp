// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#include "tmcast/training.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <json.hpp>

#include "tmcast/error.hpp"
#include "tmcast/nn/optim.hpp"

namespace tmcast::train {

using nn::Tensor;

void TrainingConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("training." + what); };
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (min_learning_rate < 0.0 || min_learning_rate > learning_rate)
    fail("min_learning_rate must lie in [0, learning_rate]");
  if (batch_size < 1) fail("batch_size must be positive");
  if (max_epochs < 1) fail("max_epochs must be positive");
  if (early_stop_patience < 1 || early_stop_patience > max_epochs)
    fail("early_stop_patience must lie in [1, max_epochs]");
  if (weight_decay < 0.0) fail("weight_decay must be nonnegative");
  if (accumulation_steps < 1) fail("accumulation_steps must be positive");
  if (lr_schedule != "cosine" && lr_schedule != "constant")
    fail("lr_schedule must be cosine or constant");
  if (precision != "fp64")
    fail("precision '" + precision + "' is not supported; only fp64 is implemented");
  if (max_steps < 0) fail("max_steps must be nonnegative");
  if (overfit_samples < 0) fail("overfit_samples must be nonnegative");
  if (validate_every < 1) fail("validate_every must be positive");
}

DataBundle prepare_data(const data::TrafficMatrixSeries& series, image::ImageMode mode,
                        int input_length, int output_length, std::array<double, 3> ratios,
                        int stride, int overfit_samples) {
  DataBundle d;
  d.split = data::chronological_split(series, ratios);
  auto windows = [&](const data::TrafficMatrixSeries& s, const char* name) {
    try {
      return data::window_origins(s.length(), input_length, output_length, stride);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(name) + " split: " + e.what());
    }
  };
  d.train = model::encode_series(d.split.train, mode);
  d.validation = model::encode_series(d.split.validation, mode);
  d.test = model::encode_series(d.split.test, mode);
  d.train_origins = windows(d.split.train, "train");
  d.validation_origins = windows(d.split.validation, "validation");
  d.test_origins = windows(d.split.test, "test");
  if (overfit_samples > 0) {
    if (static_cast<std::size_t>(overfit_samples) > d.train_origins.size())
      throw ConfigError("training.overfit_samples=" + std::to_string(overfit_samples) +
                        " exceeds the " + std::to_string(d.train_origins.size()) +
                        " training windows");
    d.overfit_origins.assign(d.train_origins.begin(), d.train_origins.begin() + overfit_samples);
  }
  return d;
}

bool EarlyStopping::update(double loss, int epoch) {
  improved_ = best_epoch_ < 0 || loss < best_;
  if (improved_) {
    best_ = loss;
    best_epoch_ = epoch;
    stale_ = 0;
  } else {
    ++stale_;
  }
  return stale_ >= patience_;
}

double learning_rate_at(const TrainingConfig& config, int epoch) {
  if (config.lr_schedule == "constant") return config.learning_rate;
  return nn::cosine_learning_rate(config.learning_rate, config.min_learning_rate, epoch,
                                  config.max_epochs);
}

namespace {

std::vector<std::size_t> chunk(const std::vector<std::size_t>& v, std::size_t start,
                               std::size_t size) {
  const std::size_t end = std::min(v.size(), start + size);
  return {v.begin() + static_cast<std::ptrdiff_t>(start), v.begin() + static_cast<std::ptrdiff_t>(end)};
}

std::string origins_text(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t o : v) s += (s.empty() ? "" : ",") + std::to_string(o);
  return s;
}

}  // namespace

double validation_loss(const model::Forecaster& model, const model::EncodedSeries& series,
                       const std::vector<std::size_t>& origins, int batch_size,
                       std::uint64_t seed) {
  if (origins.empty()) throw ConfigError("validation split has no windows");
  nn::NoGradGuard no_grad;
  nn::Rng rng(seed);
  const auto& cfg = model.config();
  double total = 0.0;
  for (std::size_t start = 0; start < origins.size(); start += static_cast<std::size_t>(batch_size)) {
    const auto part = chunk(origins, start, static_cast<std::size_t>(batch_size));
    const auto batch = model::make_batch(series, part, cfg.input_length, cfg.output_length);
    total += model.loss(batch.inputs, batch.targets, rng).value()[0] * static_cast<double>(part.size());
  }
  return total / static_cast<double>(origins.size());
}

TrainingResult train(model::Forecaster& model, const DataBundle& data,
                     const TrainingConfig& config, const LogSink& log) {
  config.validate();
  const bool overfit = config.overfit_samples > 0;
  const auto& train_series = data.train;
  const auto& train_origins = overfit ? data.overfit_origins : data.train_origins;
  const auto& val_series = overfit ? data.train : data.validation;
  const auto& val_origins = overfit ? data.overfit_origins : data.validation_origins;
  if (train_origins.empty()) throw ConfigError("training split has no windows");
  const auto& cfg = model.config();

  nn::AdamWOptions opts;
  opts.weight_decay = config.weight_decay;
  std::vector<nn::Var> params = model.params().trainable_params();
  nn::AdamW optimizer(params, opts);
  EarlyStopping stopper(config.early_stop_patience);
  nn::Rng rng(model::stream_seed(config.seed, 0x7472, 0));
  const std::uint64_t val_seed = model::stream_seed(config.seed, 0x76616c, 0);

  auto emit = [&](const nlohmann::json& rec) {
    if (log) log(rec.dump());
  };

  std::vector<Tensor> best;
  TrainingResult result;
  bool capped = false;
  for (int epoch = 0; epoch < config.max_epochs && !capped; ++epoch) {
    const double lr = learning_rate_at(config, epoch);
    std::vector<std::size_t> order = train_origins;
    // A batch larger than the overfit set cycles through it; each copy draws
    // its own step and noise.
    if (overfit)
      while (order.size() < static_cast<std::size_t>(config.batch_size))
        order.push_back(train_origins[order.size() % train_origins.size()]);
    nn::Rng shuffle_rng(model::stream_seed(config.seed, 0x73687566, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    int micro = 0;
    double micro_loss = 0.0;
    std::size_t micro_samples = 0;
    const std::size_t bs = static_cast<std::size_t>(config.batch_size);
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const auto part = chunk(order, start, bs);
      const auto batch = model::make_batch(train_series, part, cfg.input_length, cfg.output_length);
      nn::Var loss = model.loss(batch.inputs, batch.targets, rng);
      const double value = loss.value()[0];
      if (!std::isfinite(value))
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(start / bs) + " (window origins " +
                           origins_text(part) + ")");
      if (config.accumulation_steps > 1) loss = nn::scale(loss, 1.0 / config.accumulation_steps);
      nn::backward(loss);
      micro_loss += value;
      micro_samples += part.size();
      ++micro;
      const bool last = start + bs >= order.size();
      if (micro == config.accumulation_steps || last) {
        optimizer.step(lr);
        optimizer.zero_grad();
        ++result.steps;
        const double mean_loss = micro_loss / micro;
        result.step_losses.push_back(mean_loss);
        emit({{"split", "train"}, {"epoch", epoch}, {"step", result.steps}, {"loss", mean_loss},
              {"lr", lr}, {"samples", micro_samples}});
        micro = 0;
        micro_loss = 0.0;
        micro_samples = 0;
        if (config.max_steps > 0 && result.steps >= config.max_steps) {
          capped = true;
          break;
        }
      }
    }
    result.epochs_run = epoch + 1;

    const bool last_epoch = epoch + 1 == config.max_epochs || capped;
    if ((epoch + 1) % config.validate_every == 0 || last_epoch) {
      const double v = validation_loss(model, val_series, val_origins, config.batch_size, val_seed);
      if (!std::isfinite(v))
        throw NumericError("non-finite validation loss at epoch " + std::to_string(epoch));
      result.validation_losses.push_back(v);
      emit({{"split", "validation"}, {"epoch", epoch}, {"step", result.steps}, {"loss", v},
            {"lr", lr}});
      const bool stop = stopper.update(v, epoch);
      if (stopper.improved()) {
        best.clear();
        for (const auto& p : params) best.push_back(p.value());
      }
      if (stop) {
        result.early_stopped = true;
        break;
      }
    }
  }
  if (!best.empty())
    for (std::size_t i = 0; i < params.size(); ++i) params[i].mutable_value() = best[i];
  result.best_epoch = stopper.best_epoch();
  result.best_validation_loss = stopper.best();
  return result;
}

const HorizonRow& EvalReport::row(const std::string& predictor, int horizon) const {
  for (const auto& r : rows)
    if (r.predictor == predictor && r.horizon == horizon) return r;
  throw ConfigError("report has no row for " + predictor + " at horizon " + std::to_string(horizon));
}

EvalReport evaluate(const model::Forecaster& model, const model::EncodedSeries& series,
                    const std::vector<std::size_t>& origins, const EvalOptions& options) {
  const auto& cfg = model.config();
  if (options.horizons.empty()) throw ConfigError("evaluation needs at least one horizon");
  for (int h : options.horizons)
    if (h < 1 || h > cfg.output_length)
      throw ConfigError("horizon " + std::to_string(h) + " exceeds the trained T_out of " +
                        std::to_string(cfg.output_length));
  if (options.batch_size < 1) throw ConfigError("eval batch_size must be positive");
  std::vector<std::size_t> windows = origins;
  if (options.max_windows > 0 && windows.size() > options.max_windows)
    windows.resize(options.max_windows);
  if (windows.empty()) throw ConfigError("evaluation split has no windows");

  nn::NoGradGuard no_grad;
  EvalReport report;
  report.ablation = std::string(model::ablation_name(cfg.ablation));
  report.windows = windows.size();
  report.horizons = options.horizons;
  const int n = cfg.node_count;
  const int c = model.channels();
  const std::size_t plane = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
  std::vector<eval::HorizonAccumulator> acc_model(options.horizons.size());
  std::vector<eval::HorizonAccumulator> acc_base(options.horizons.size());
  image::DecodeStats stats;

  auto truth_plane = [&](std::size_t frame) {
    const auto& src = series.frames.at(frame).channels[0];
    std::vector<double> out(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) out[i] = src[i] / 255.0;
    return out;
  };

  const std::size_t bs = static_cast<std::size_t>(options.batch_size);
  for (std::size_t start = 0; start < windows.size(); start += bs) {
    const auto part = chunk(windows, start, bs);
    const auto batch = model::make_batch(series, part, cfg.input_length, cfg.output_length);
    std::vector<std::uint64_t> seeds;
    for (std::size_t o : part) seeds.push_back(model::stream_seed(options.seed, o, 0x65766c));
    Tensor weights;
    const Tensor pred = model.sample(batch.inputs, options.sampler, seeds,
                                     options.dump_attention ? &weights : nullptr);
    for (std::size_t b = 0; b < part.size(); ++b) {
      const std::size_t o = part[b];
      const auto last_seen = truth_plane(o + static_cast<std::size_t>(cfg.input_length) - 1);
      const auto baseline = eval::persistence_baseline({last_seen}, cfg.output_length);
      for (std::size_t hi = 0; hi < options.horizons.size(); ++hi) {
        const int h = options.horizons[hi];
        const auto truth = truth_plane(o + static_cast<std::size_t>(cfg.input_length + h - 1));
        const double* p = pred.data() +
                          (static_cast<std::size_t>(b) * static_cast<std::size_t>(cfg.output_length * c) +
                           static_cast<std::size_t>((h - 1) * c)) * plane;
        const auto predicted = eval::metric_space(std::span<const double>(p, plane), n, &stats);
        acc_model[hi].add(eval::compute_metrics(predicted, truth));
        acc_base[hi].add(eval::compute_metrics(baseline[static_cast<std::size_t>(h - 1)], truth));
        if (start == 0 && b == 0) {
          report.preview_prediction.push_back(predicted);
          report.preview_truth.push_back(truth);
        }
      }
      if (options.dump_attention && weights.size() > 0) {
        const std::int64_t t = weights.dim(1);
        report.attention.emplace_back(weights.data() + static_cast<std::int64_t>(b) * t,
                                      weights.data() + static_cast<std::int64_t>(b + 1) * t);
      }
    }
  }
  for (std::size_t hi = 0; hi < options.horizons.size(); ++hi) {
    for (int which = 0; which < 2; ++which) {
      const auto& acc = which == 0 ? acc_model[hi] : acc_base[hi];
      HorizonRow r;
      r.predictor = which == 0 ? "model" : "persistence";
      r.horizon = options.horizons[hi];
      r.mean = acc.mean();
      r.sample_mae = acc.mae;
      r.sample_rmse = acc.rmse;
      report.rows.push_back(std::move(r));
    }
  }
  report.clamped = stats.clamped;
  return report;
}

}  // namespace tmcast::train
