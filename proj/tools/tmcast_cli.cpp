// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end over the C interface.
// Exit codes: 0 success, 1 usage, 2 data, 3 runtime.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tmcast/tmcast.h"

namespace {

struct ConfigDeleter {
  void operator()(tmcast_config* c) const { tmcast_config_free(c); }
};
using ConfigPtr = std::unique_ptr<tmcast_config, ConfigDeleter>;

int report(tmcast_status status) {
  if (status != TMCAST_OK) std::cerr << "error: " << tmcast_last_error() << '\n';
  return static_cast<int>(status);
}

// Prints and frees a library-owned string.
void print_owned(char* text) {
  if (!text) return;
  std::cout << text << '\n';
  tmcast_string_free(text);
}

struct RunOptions {
  std::string preset = "toy";
  std::string config_path;
  std::string data;
  std::string ablation;
  std::string out;
  std::vector<std::string> sets;
  std::int64_t seed = -1;
};

void add_run_options(CLI::App* cmd, RunOptions& o, bool variant_flag) {
  cmd->add_option("--preset", o.preset, "Base preset: toy or paper")->capture_default_str();
  cmd->add_option("--config", o.config_path, "Config file (JSON); replaces --preset");
  cmd->add_option("--data", o.data, "Dataset path (overrides data.path)");
  cmd->add_option("--seed", o.seed, "Run seed (overrides seed)");
  if (variant_flag)
    cmd->add_option("--ablation", o.ablation,
                    "Variant: full, no_msc, no_cglobal, no_cseq, no_llm, grayscale");
  cmd->add_option("--out", o.out, "Output directory (overrides output_dir)");
  cmd->add_option("--set", o.sets, "Override a dotted key: key=value (repeatable)");
}

// Snapshots record data paths independent of the working directory.
std::string absolute_path(const std::string& path) {
  std::error_code ec;
  const auto abs = std::filesystem::absolute(path, ec);
  return ec ? path : abs.lexically_normal().string();
}

// File or preset first, then flag overrides; flags win.
tmcast_status resolve_config(const RunOptions& o, ConfigPtr& out) {
  tmcast_config* raw = nullptr;
  tmcast_status st = o.config_path.empty() ? tmcast_config_preset(o.preset.c_str(), &raw)
                                           : tmcast_config_load(o.config_path.c_str(), &raw);
  if (st != TMCAST_OK) return st;
  out.reset(raw);
  // All overrides go in one batch so their order does not matter.
  std::vector<std::string> keys, values;
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::cerr << "error: --set expects key=value, got '" << kv << "'\n";
      return TMCAST_E_USAGE;
    }
    keys.push_back(kv.substr(0, eq));
    values.push_back(kv.substr(eq + 1));
  }
  auto flag = [&](const char* key, const std::string& value) {
    keys.emplace_back(key);
    values.push_back(value);
  };
  if (!o.data.empty()) flag("data.path", absolute_path(o.data));
  if (o.seed >= 0) flag("seed", std::to_string(o.seed));
  if (!o.ablation.empty()) flag("ablation.variant", o.ablation);
  if (!o.out.empty()) flag("output_dir", o.out);
  std::vector<const char*> key_ptrs, value_ptrs;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    key_ptrs.push_back(keys[i].c_str());
    value_ptrs.push_back(values[i].c_str());
  }
  st = tmcast_config_set_many(out.get(), key_ptrs.data(), value_ptrs.data(), keys.size());
  if (st != TMCAST_OK) return st;
  return TMCAST_OK;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tmcast: diffusion forecasting of network traffic matrices"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(tmcast_version()));

  int nodes = 0, length = 0;
  std::uint64_t synth_seed = 1;
  double burst_rate = 0.05;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic traffic-matrix series");
  synth->add_option("--nodes", nodes, "Node count N (>= 2)")->required();
  synth->add_option("--length", length, "Number of timesteps")->required();
  synth->add_option("--seed", synth_seed, "Generator seed")->capture_default_str();
  synth->add_option("--burst-rate", burst_rate, "Burst rate in [0, 1]")->capture_default_str();
  synth->add_option("-o,--output", synth_out, "Output file (canonical format)")->required();

  RunOptions train_opts, ablate_opts;
  auto* train = app.add_subcommand("train", "Train a forecaster and write a checkpoint");
  add_run_options(train, train_opts, true);
  auto* ablate = app.add_subcommand("ablate", "Train and evaluate all six variants");
  add_run_options(ablate, ablate_opts, false);

  std::string checkpoint, eval_data, split, eval_out;
  std::vector<int> horizons;
  int num_samples = 0;
  bool dump_attention = false, no_plots = false;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint against persistence");
  eval->add_option("checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--data", eval_data, "Dataset path (default: the training dataset)");
  eval->add_option("--split", split, "train, validation, test or overfit");
  eval->add_option("--horizons", horizons, "Horizons to report (each <= T_out)")->delimiter(',');
  eval->add_option("--num-samples", num_samples, "Diffusion draws averaged per forecast");
  eval->add_flag("--dump-attention", dump_attention, "Emit per-sample pooling weights");
  eval->add_flag("--no-plots", no_plots, "Skip PNG and SVG output");
  eval->add_option("--out", eval_out, "Output directory (default: beside the checkpoint)");

  std::string inspect_path;
  auto* inspect = app.add_subcommand("inspect-checkpoint", "Describe and verify a checkpoint");
  inspect->add_option("checkpoint", inspect_path, "Checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return TMCAST_E_USAGE;
  }

  if (*synth) {
    const tmcast_status st =
        tmcast_synth(nodes, length, synth_seed, burst_rate, synth_out.c_str());
    if (st == TMCAST_OK) std::cout << "wrote " << synth_out << '\n';
    return report(st);
  }
  if (*train || *ablate) {
    ConfigPtr cfg;
    tmcast_status st = resolve_config(*train ? train_opts : ablate_opts, cfg);
    if (st != TMCAST_OK) return report(st);
    char* summary = nullptr;
    st = *train ? tmcast_train(cfg.get(), &summary) : tmcast_ablate(cfg.get(), &summary);
    print_owned(summary);
    return report(st);
  }
  if (*eval) {
    tmcast_eval_request r{};
    r.checkpoint = checkpoint.c_str();
    const std::string data_abs = eval_data.empty() ? "" : absolute_path(eval_data);
    r.data_path = data_abs.empty() ? nullptr : data_abs.c_str();
    r.split = split.empty() ? nullptr : split.c_str();
    r.horizons = horizons.data();
    r.horizon_count = horizons.size();
    r.num_samples = num_samples;
    r.dump_attention = dump_attention ? 1 : 0;
    r.out_dir = eval_out.empty() ? nullptr : eval_out.c_str();
    r.plots = no_plots ? 0 : 1;
    char* out = nullptr;
    const tmcast_status st = tmcast_eval(&r, &out);
    print_owned(out);
    return report(st);
  }
  char* info = nullptr;
  const tmcast_status st = tmcast_inspect_checkpoint(inspect_path.c_str(), &info);
  print_owned(info);
  return report(st);
}
