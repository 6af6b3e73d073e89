// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#include "tmcast/experiment.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include "tmcast/checkpoint.hpp"
#include "tmcast/error.hpp"
#include "tmcast/report.hpp"

namespace tmcast::experiment {

using json = nlohmann::json;

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

image::ImageMode image_mode(model::Ablation a) {
  return a == model::Ablation::grayscale ? image::ImageMode::grayscale : image::ImageMode::rgb;
}

std::string model_id(const model::Forecaster& m) {
  std::string digest;
  for (const auto& s : m.params().sections()) digest += io::section_checksum(m.params(), s);
  return std::string(model::ablation_name(m.config().ablation)) + "-" +
         io::sha256_hex(digest.data(), digest.size()).substr(0, 12);
}

}  // namespace

json census_json(const std::vector<testkit::SectionCensus>& census) {
  json sections = json::array();
  std::size_t trainable = 0, frozen = 0;
  for (const auto& c : census) {
    sections.push_back({{"section", c.section}, {"trainable", c.trainable}, {"frozen", c.frozen}});
    trainable += c.trainable;
    frozen += c.frozen;
  }
  return {{"sections", sections}, {"trainable", trainable}, {"frozen", frozen}};
}

data::TrafficMatrixSeries load_dataset(const config::ExperimentConfig& cfg) {
  const json& d = cfg.document().at("data");
  const std::string path = d.at("path").get<std::string>();
  if (path.empty()) {
    const json& s = d.at("synthetic");
    data::SyntheticOptions opts;
    opts.interval_seconds = d.at("interval").get<int>();
    return data::generate_synthetic(s.at("nodes").get<int>(), s.at("length").get<int>(),
                                    s.at("seed").get<std::uint64_t>(),
                                    s.at("burst_rate").get<double>(), opts)
        .series;
  }
  const auto format = d.at("format").get<std::string>() == "csv_rowmajor"
                          ? data::SeriesFormat::csv_rowmajor
                          : data::SeriesFormat::canonical;
  return data::load_series(path, format, d.at("nodes").get<int>(), d.at("interval").get<int>());
}

std::unique_ptr<model::Forecaster> build_model(const config::ExperimentConfig& cfg,
                                               int node_count) {
  auto m = std::make_unique<model::Forecaster>(cfg.model_config(node_count), cfg.seed());
  const auto& bb = m->config().backbone;
  if (bb.source == "external_checkpoint" && m->config().ablation != model::Ablation::no_llm)
    io::load_backbone_section(bb.checkpoint_path, m->params());
  return m;
}

train::DataBundle prepare(const config::ExperimentConfig& cfg,
                          const data::TrafficMatrixSeries& series) {
  const auto mc = cfg.model_config(series.node_count);
  return train::prepare_data(series, image_mode(mc.ablation), mc.input_length, mc.output_length,
                             cfg.split_ratios(),
                             cfg.document().at("data").at("stride").get<int>(),
                             cfg.training().overfit_samples);
}

std::pair<const model::EncodedSeries*, std::vector<std::size_t>> select_split(
    const train::DataBundle& data, const std::string& split) {
  if (split == "train") return {&data.train, data.train_origins};
  if (split == "validation") return {&data.validation, data.validation_origins};
  if (split == "test") return {&data.test, data.test_origins};
  if (split == "overfit") {
    if (data.overfit_origins.empty())
      throw ConfigError("split 'overfit' needs training.overfit_samples > 0");
    return {&data.train, data.overfit_origins};
  }
  throw ConfigError("unknown split '" + split + "' (valid: train, validation, test, overfit)");
}

TrainArtifacts run_train(const config::ExperimentConfig& cfg) {
  const auto series = load_dataset(cfg);
  const auto data = prepare(cfg, series);
  auto m = build_model(cfg, series.node_count);

  TrainArtifacts out;
  out.dir = cfg.output_dir();
  ensure_dir(out.dir);
  out.checkpoint = out.dir / "checkpoint.tmc";
  out.log = out.dir / "train_log.ndjson";
  out.snapshot = out.dir / "config.json";
  out.census = testkit::param_census(m->params());
  report::write_text(out.snapshot, cfg.dump());

  std::ofstream log(out.log, std::ios::binary | std::ios::trunc);
  if (!log) throw IoError("cannot open " + out.log.string() + " for writing");
  auto sink = [&](const std::string& line) {
    log << line << '\n';
    if (!log) throw IoError("failed writing " + out.log.string());
  };
  json census = census_json(out.census);
  census["record"] = "census";
  census["ablation"] = std::string(model::ablation_name(m->config().ablation));
  sink(census.dump());

  out.result = train::train(*m, data, cfg.training(), sink);
  json summary{{"record", "summary"},
               {"steps", out.result.steps},
               {"epochs", out.result.epochs_run},
               {"best_epoch", out.result.best_epoch},
               {"best_validation_loss", out.result.best_validation_loss},
               {"early_stopped", out.result.early_stopped}};
  sink(summary.dump());
  log.close();

  json meta = summary;
  meta.erase("record");
  meta["node_count"] = series.node_count;
  io::save_checkpoint(out.checkpoint, *m, cfg.document(), meta);
  return out;
}

json report_to_json(const train::EvalReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"predictor", row.predictor},
                    {"horizon", row.horizon},
                    {"mae", row.mean.mae},
                    {"rmse", row.mean.rmse},
                    {"sample_mae", row.sample_mae},
                    {"sample_rmse", row.sample_rmse}});
  json j{{"model_id", r.model_id},  {"ablation", r.ablation}, {"split", r.split},
         {"windows", r.windows},    {"horizons", r.horizons}, {"train_steps", r.train_steps},
         {"clamped", r.clamped},    {"rows", rows}};
  if (!r.attention.empty()) j["attention"] = r.attention;
  if (r.wall_seconds) j["wall_seconds"] = *r.wall_seconds;
  return j;
}

EvalArtifacts run_eval(const EvalRequest& request) {
  const json header = io::read_checkpoint_header(request.checkpoint);
  auto cfg = config::ExperimentConfig::from_json(header.at("config"));
  if (!request.data_path.empty()) cfg.set("data.path", json(request.data_path));
  if (!request.split.empty()) cfg.set("eval.split", json(request.split));
  if (!request.horizons.empty()) cfg.set("eval.horizons", json(request.horizons));
  if (request.num_samples > 0) cfg.set("diffusion.num_samples", json(request.num_samples));
  if (request.dump_attention) cfg.set("eval.dump_attention", json(true));

  const auto start = std::chrono::steady_clock::now();
  const auto series = load_dataset(cfg);
  const auto data = prepare(cfg, series);
  auto m = build_model(cfg, series.node_count);
  io::load_parameters(request.checkpoint, *m);
  const std::string split = cfg.get("eval.split").get<std::string>();
  const auto [encoded, origins] = select_split(data, split);

  EvalArtifacts out;
  out.report = train::evaluate(*m, *encoded, origins, cfg.eval_options());
  out.report.model_id = model_id(*m);
  out.report.split = split;
  out.report.train_steps = header.at("metadata").value("steps", 0L);
  if (!cfg.deterministic())
    out.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const fs::path dir = request.out_dir.empty() ? request.checkpoint.parent_path() : request.out_dir;
  ensure_dir(dir.empty() ? fs::path(".") : dir);
  out.report_path = dir / "eval_report.json";
  report::write_text(out.report_path, report_to_json(out.report).dump(2) + "\n");

  if (request.plots && cfg.get("eval.plots").get<bool>()) {
    std::vector<report::Bar> bars;
    for (const auto& row : out.report.rows)
      bars.push_back({"h=" + std::to_string(row.horizon), row.predictor, row.mean.rmse});
    const fs::path chart = dir / "rmse_by_horizon.svg";
    report::write_bar_chart_svg(chart, "RMSE by horizon (" + split + ")", bars);
    out.plots.push_back(chart);
    for (std::size_t i = 0; i < out.report.preview_prediction.size(); ++i) {
      const fs::path p = dir / ("heatmap_h" + std::to_string(out.report.horizons[i]) + ".png");
      report::write_heatmap_pair(p, out.report.preview_prediction[i], out.report.preview_truth[i],
                                 series.node_count);
      out.plots.push_back(p);
    }
  }
  return out;
}

bool AblationResult::all_ok() const {
  for (const auto& r : rows)
    if (!r.ok) return false;
  return true;
}

AblationResult run_ablate(const config::ExperimentConfig& cfg) {
  AblationResult result;
  const fs::path base = cfg.output_dir();
  ensure_dir(base);
  for (model::Ablation a : model::all_ablations()) {
    AblationRow row;
    row.variant = std::string(model::ablation_name(a));
    try {
      auto v = cfg;
      v.set("ablation.variant", json(row.variant));
      v.set("output_dir", json((base / row.variant).string()));
      const auto trained = run_train(v);
      for (const auto& c : trained.census) {
        row.trainable += c.trainable;
        row.frozen += c.frozen;
      }
      EvalRequest req;
      req.checkpoint = trained.checkpoint;
      const auto evaluated = run_eval(req);
      for (const auto& r : evaluated.report.rows)
        if (r.predictor == "model") row.metrics.push_back(r);
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    result.rows.push_back(std::move(row));
  }

  json rows = json::array();
  std::ostringstream table;
  table << "| Variant | Trainable params | Frozen params";
  std::vector<int> horizons = cfg.get("eval.horizons").get<std::vector<int>>();
  for (int h : horizons) table << " | MAE h=" << h << " | RMSE h=" << h;
  table << " |\n|---|---|---";
  for (std::size_t i = 0; i < horizons.size(); ++i) table << "|---|---";
  table << "|\n";
  std::vector<report::Bar> bars;
  for (const auto& r : result.rows) {
    json metrics = json::array();
    for (const auto& m : r.metrics) {
      metrics.push_back({{"horizon", m.horizon}, {"mae", m.mean.mae}, {"rmse", m.mean.rmse}});
      bars.push_back({"h=" + std::to_string(m.horizon), r.variant, m.mean.rmse});
    }
    json jr{{"variant", r.variant}, {"status", r.ok ? "ok" : "failed"}, {"metrics", metrics},
            {"trainable", r.trainable}, {"frozen", r.frozen}};
    if (!r.ok) jr["error"] = r.error;
    rows.push_back(std::move(jr));
    table << "| " << r.variant << " | " << r.trainable << " | " << r.frozen;
    if (r.ok) {
      for (const auto& m : r.metrics) table << " | " << m.mean.mae << " | " << m.mean.rmse;
    } else {
      for (std::size_t i = 0; i < horizons.size(); ++i) table << " | failed | failed";
    }
    table << " |\n";
  }
  result.report_path = base / "ablation_report.json";
  result.table_path = base / "ablation_table.md";
  result.chart_path = base / "ablation_rmse.svg";
  report::write_text(result.report_path,
                     json{{"seed", cfg.seed()}, {"variants", rows}}.dump(2) + "\n");
  report::write_text(result.table_path, table.str());
  report::write_bar_chart_svg(result.chart_path, "RMSE by ablation variant", bars);
  return result;
}

void run_synth(int nodes, int length, std::uint64_t seed, double burst_rate, const fs::path& out) {
  if (nodes < 2) throw ConfigError("--nodes must be >= 2");
  if (length < 1) throw ConfigError("--length must be >= 1");
  if (burst_rate < 0.0 || burst_rate > 1.0) throw ConfigError("--burst-rate must lie in [0, 1]");
  const auto s = data::generate_synthetic(nodes, length, seed, burst_rate);
  if (out.has_parent_path()) ensure_dir(out.parent_path());
  data::save_canonical(s.series, out);
}

}  // namespace tmcast::experiment
