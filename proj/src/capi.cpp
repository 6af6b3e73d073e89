// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#include "tmcast/tmcast.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include <json.hpp>

#include "tmcast/checkpoint.hpp"
#include "tmcast/config.hpp"
#include "tmcast/error.hpp"
#include "tmcast/experiment.hpp"

struct tmcast_series {
  tmcast::data::TrafficMatrixSeries value;
};

struct tmcast_config {
  tmcast::config::ExperimentConfig value;
};

namespace {

using json = nlohmann::json;

thread_local std::string g_last_error;

tmcast_status fail(tmcast_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Runs `body`, translating exceptions into status codes.
template <typename F>
tmcast_status guarded(F&& body) {
  try {
    g_last_error.clear();
    return body();
  } catch (const tmcast::Error& e) {
    return fail(static_cast<tmcast_status>(e.kind()), e.what());
  } catch (const json::exception& e) {
    return fail(TMCAST_E_USAGE, std::string("invalid JSON: ") + e.what());
  } catch (const std::bad_alloc&) {
    return fail(TMCAST_E_RUNTIME, "out of memory");
  } catch (const std::exception& e) {
    return fail(TMCAST_E_RUNTIME, e.what());
  } catch (...) {
    return fail(TMCAST_E_RUNTIME, "unknown failure");
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(char** out, const json& j) {
  if (out) *out = copy_string(j.dump(2));
}

#define TMCAST_REQUIRE(cond, msg) \
  if (!(cond)) return fail(TMCAST_E_USAGE, msg)

}  // namespace

extern "C" {

const char* tmcast_version(void) { return "0.1.0"; }

const char* tmcast_last_error(void) { return g_last_error.c_str(); }

void tmcast_string_free(char* s) { std::free(s); }

tmcast_status tmcast_series_generate(int nodes, int length, uint64_t seed, double burst_rate,
                                     tmcast_series** out) {
  TMCAST_REQUIRE(out, "tmcast_series_generate: out is null");
  return guarded([&] {
    auto s = tmcast::data::generate_synthetic(nodes, length, seed, burst_rate);
    *out = new tmcast_series{std::move(s.series)};
    return TMCAST_OK;
  });
}

tmcast_status tmcast_series_load(const char* path, const char* format, int nodes,
                                 int interval_seconds, tmcast_series** out) {
  TMCAST_REQUIRE(path && out, "tmcast_series_load: path and out are required");
  return guarded([&] {
    const std::string f = format ? format : "canonical";
    tmcast::data::SeriesFormat kind;
    if (f == "canonical") {
      kind = tmcast::data::SeriesFormat::canonical;
    } else if (f == "csv_rowmajor") {
      kind = tmcast::data::SeriesFormat::csv_rowmajor;
    } else {
      throw tmcast::ConfigError("unknown series format '" + f +
                                "' (valid: canonical, csv_rowmajor)");
    }
    *out = new tmcast_series{tmcast::data::load_series(path, kind, nodes, interval_seconds)};
    return TMCAST_OK;
  });
}

tmcast_status tmcast_series_save(const tmcast_series* series, const char* path) {
  TMCAST_REQUIRE(series && path, "tmcast_series_save: series and path are required");
  return guarded([&] {
    tmcast::data::save_canonical(series->value, path);
    return TMCAST_OK;
  });
}

tmcast_status tmcast_series_shape(const tmcast_series* series, int* nodes, size_t* length) {
  TMCAST_REQUIRE(series, "tmcast_series_shape: series is null");
  if (nodes) *nodes = series->value.node_count;
  if (length) *length = series->value.length();
  return TMCAST_OK;
}

tmcast_status tmcast_series_matrix(const tmcast_series* series, size_t t, double* buffer,
                                   size_t capacity) {
  TMCAST_REQUIRE(series && buffer, "tmcast_series_matrix: series and buffer are required");
  TMCAST_REQUIRE(t < series->value.length(), "tmcast_series_matrix: index out of range");
  const auto& m = series->value.matrices[t];
  TMCAST_REQUIRE(capacity >= m.size(), "tmcast_series_matrix: buffer too small");
  std::memcpy(buffer, m.data(), m.size() * sizeof(double));
  return TMCAST_OK;
}

void tmcast_series_free(tmcast_series* series) { delete series; }

tmcast_status tmcast_synth(int nodes, int length, uint64_t seed, double burst_rate,
                           const char* path) {
  TMCAST_REQUIRE(path, "tmcast_synth: path is null");
  return guarded([&] {
    tmcast::experiment::run_synth(nodes, length, seed, burst_rate, path);
    return TMCAST_OK;
  });
}

tmcast_status tmcast_config_preset(const char* name, tmcast_config** out) {
  TMCAST_REQUIRE(name && out, "tmcast_config_preset: name and out are required");
  return guarded([&] {
    *out = new tmcast_config{tmcast::config::ExperimentConfig::preset(name)};
    return TMCAST_OK;
  });
}

tmcast_status tmcast_config_load(const char* path, tmcast_config** out) {
  TMCAST_REQUIRE(path && out, "tmcast_config_load: path and out are required");
  return guarded([&] {
    *out = new tmcast_config{tmcast::config::ExperimentConfig::load(path)};
    return TMCAST_OK;
  });
}

tmcast_status tmcast_config_from_json(const char* text, tmcast_config** out) {
  TMCAST_REQUIRE(text && out, "tmcast_config_from_json: text and out are required");
  return guarded([&] {
    *out = new tmcast_config{tmcast::config::ExperimentConfig::from_json(json::parse(text))};
    return TMCAST_OK;
  });
}

tmcast_status tmcast_config_set(tmcast_config* config, const char* key, const char* value) {
  TMCAST_REQUIRE(config && key && value, "tmcast_config_set: config, key and value are required");
  return guarded([&] {
    // Apply to a copy so a rejected override leaves the handle untouched.
    auto next = config->value;
    next.set(key, std::string_view(value));
    config->value = std::move(next);
    return TMCAST_OK;
  });
}

tmcast_status tmcast_config_set_many(tmcast_config* config, const char* const* keys,
                                     const char* const* values, size_t count) {
  TMCAST_REQUIRE(config && (count == 0 || (keys && values)),
                 "tmcast_config_set_many: config, keys and values are required");
  return guarded([&] {
    std::vector<std::pair<std::string, std::string>> overrides;
    for (size_t i = 0; i < count; ++i) {
      if (!keys[i] || !values[i]) throw tmcast::ConfigError("tmcast_config_set_many: null key or value");
      overrides.emplace_back(keys[i], values[i]);
    }
    config->value.set_many(overrides);
    return TMCAST_OK;
  });
}

tmcast_status tmcast_config_to_json(const tmcast_config* config, char** out) {
  TMCAST_REQUIRE(config && out, "tmcast_config_to_json: config and out are required");
  return guarded([&] {
    *out = copy_string(config->value.dump());
    return TMCAST_OK;
  });
}

void tmcast_config_free(tmcast_config* config) { delete config; }

tmcast_status tmcast_train(const tmcast_config* config, char** summary_json) {
  TMCAST_REQUIRE(config, "tmcast_train: config is null");
  return guarded([&] {
    const auto a = tmcast::experiment::run_train(config->value);
    const json census = tmcast::experiment::census_json(a.census);
    emit(summary_json, {{"output_dir", a.dir.string()},
                        {"checkpoint", a.checkpoint.string()},
                        {"log", a.log.string()},
                        {"config", a.snapshot.string()},
                        {"steps", a.result.steps},
                        {"epochs", a.result.epochs_run},
                        {"best_epoch", a.result.best_epoch},
                        {"best_validation_loss", a.result.best_validation_loss},
                        {"early_stopped", a.result.early_stopped},
                        {"census", census}});
    return TMCAST_OK;
  });
}

tmcast_status tmcast_eval(const tmcast_eval_request* request, char** report_json) {
  TMCAST_REQUIRE(request && request->checkpoint, "tmcast_eval: checkpoint is required");
  TMCAST_REQUIRE(request->horizon_count == 0 || request->horizons,
                 "tmcast_eval: horizons pointer is null");
  return guarded([&] {
    tmcast::experiment::EvalRequest r;
    r.checkpoint = request->checkpoint;
    if (request->data_path) r.data_path = request->data_path;
    if (request->split) r.split = request->split;
    r.horizons.assign(request->horizons, request->horizons + request->horizon_count);
    r.num_samples = request->num_samples;
    r.dump_attention = request->dump_attention != 0;
    if (request->out_dir) r.out_dir = request->out_dir;
    r.plots = request->plots != 0;
    const auto a = tmcast::experiment::run_eval(r);
    json j = tmcast::experiment::report_to_json(a.report);
    j["report_path"] = a.report_path.string();
    json plots = json::array();
    for (const auto& p : a.plots) plots.push_back(p.string());
    j["plots"] = plots;
    emit(report_json, j);
    return TMCAST_OK;
  });
}

tmcast_status tmcast_ablate(const tmcast_config* config, char** report_json) {
  TMCAST_REQUIRE(config, "tmcast_ablate: config is null");
  return guarded([&] {
    const auto a = tmcast::experiment::run_ablate(config->value);
    json rows = json::array();
    std::string failed;
    for (const auto& r : a.rows) {
      json metrics = json::array();
      for (const auto& m : r.metrics)
        metrics.push_back({{"horizon", m.horizon}, {"mae", m.mean.mae}, {"rmse", m.mean.rmse}});
      json row{{"variant", r.variant}, {"status", r.ok ? "ok" : "failed"}, {"metrics", metrics},
               {"trainable", r.trainable}, {"frozen", r.frozen}};
      if (!r.ok) {
        row["error"] = r.error;
        failed += (failed.empty() ? "" : "; ") + r.variant + ": " + r.error;
      }
      rows.push_back(std::move(row));
    }
    emit(report_json, {{"variants", rows},
                       {"report", a.report_path.string()},
                       {"table", a.table_path.string()},
                       {"chart", a.chart_path.string()}});
    if (!a.all_ok()) return fail(TMCAST_E_RUNTIME, "ablation variants failed: " + failed);
    return TMCAST_OK;
  });
}

tmcast_status tmcast_inspect_checkpoint(const char* path, char** info_json) {
  TMCAST_REQUIRE(path, "tmcast_inspect_checkpoint: path is null");
  return guarded([&] {
    emit(info_json, tmcast::io::inspect_checkpoint(path));
    return TMCAST_OK;
  });
}

}  // extern "C"
