// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#include "tmcast/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "tmcast/error.hpp"

namespace tmcast::config {

using json = nlohmann::json;

namespace {

json toy_preset() {
  return json{
      {"preset", "toy"},
      {"seed", 7},
      {"deterministic", true},
      {"output_dir", "runs/toy"},
      {"data",
       {{"path", ""},
        {"format", "canonical"},
        {"nodes", 0},
        {"interval", 300},
        {"split", {0.7, 0.15, 0.15}},
        {"stride", 1},
        {"synthetic", {{"nodes", 6}, {"length", 600}, {"seed", 1}, {"burst_rate", 0.05}}}}},
      {"window", {{"input_length", 8}, {"output_length", 1}}},
      {"vision",
       {{"feature_dim", 16},
        {"model_dim", 64},
        {"residual_blocks", 2},
        {"heads", 1},
        {"attention_kernel", 7},
        {"groups", 8}}},
      {"backbone",
       {{"source", "toy_random"},
        {"checkpoint", ""},
        {"layers", 2},
        {"hidden_dim", 128},
        {"heads", 4},
        {"ffn_multiplier", 4},
        {"seed", 20240601}}},
      {"adapter",
       {{"rank", 16}, {"kernel_sizes", {3, 5}}, {"lambda_init", 0.1}, {"lambda_learnable", true}}},
      {"unet",
       {{"base_channels", 16},
        {"channel_mult", {1, 2, 4}},
        {"res_blocks", 2},
        {"attention_heads", 1},
        {"groups", 8}}},
      {"diffusion",
       {{"schedule", "linear"},
        {"steps", 200},
        // Endpoints of the 1000-step linear schedule scaled by 1000 / K so
        // that alpha_bar_K stays near zero at K = 200.
        {"beta_start", 5e-4},
        {"beta_end", 0.1},
        {"sampler", "ddim"},
        {"ddim_steps", 50},
        // A small model's eps error is amplified along the deterministic
        // path; stochastic steps with averaged draws track the data better.
        {"eta", 1.0},
        {"clip_denoised", true},
        {"num_samples", 8}}},
      {"training",
       {{"learning_rate", 2e-3},
        {"min_learning_rate", 0.0},
        {"batch_size", 32},
        {"max_epochs", 50},
        {"early_stop_patience", 10},
        {"weight_decay", 0.01},
        {"accumulation_steps", 1},
        {"lr_schedule", "cosine"},
        {"precision", "fp64"},
        {"max_steps", 0},
        {"overfit_samples", 0},
        {"validate_every", 1}}},
      {"eval",
       {{"split", "test"},
        {"horizons", {1}},
        {"batch_size", 16},
        {"dump_attention", false},
        {"plots", true},
        {"max_windows", 0}}},
      {"ablation", {{"variant", "full"}}},
  };
}

json paper_preset() {
  json p = toy_preset();
  p["preset"] = "paper";
  p["output_dir"] = "runs/paper";
  p["data"]["synthetic"] = {{"nodes", 12}, {"length", 4000}, {"seed", 1}, {"burst_rate", 0.05}};
  p["window"] = {{"input_length", 24}, {"output_length", 1}};
  p["vision"]["feature_dim"] = 32;
  p["vision"]["model_dim"] = 256;
  // Qwen2-0.5B widths; the weights stay a frozen random stand-in unless an
  // external checkpoint is given.
  p["backbone"]["layers"] = 24;
  p["backbone"]["hidden_dim"] = 896;
  p["backbone"]["heads"] = 14;
  p["adapter"]["rank"] = 64;
  p["unet"]["base_channels"] = 32;
  p["diffusion"]["steps"] = 1000;
  p["diffusion"]["beta_start"] = 1e-4;
  p["diffusion"]["beta_end"] = 0.02;
  p["diffusion"]["eta"] = 0.0;
  p["diffusion"]["num_samples"] = 1;
  p["training"]["learning_rate"] = 3e-5;
  p["training"]["batch_size"] = 32;
  p["training"]["max_epochs"] = 300;
  p["training"]["early_stop_patience"] = 30;
  return p;
}

bool same_kind(const json& base, const json& v) {
  if (base.is_boolean()) return v.is_boolean();
  if (base.is_number_integer()) return v.is_number_integer();
  if (base.is_number()) return v.is_number();
  if (base.is_string()) return v.is_string();
  if (base.is_array()) {
    if (!v.is_array()) return false;
    if (base.empty()) return true;
    for (const auto& e : v)
      if (!same_kind(base.front(), e)) return false;
    return true;
  }
  if (base.is_object()) return v.is_object();
  return false;
}

void merge_into(json& base, const json& patch, const std::string& prefix) {
  if (!patch.is_object())
    throw ConfigError("config " + (prefix.empty() ? std::string("document") : "key '" + prefix + "'") +
                      " must be an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
    json& slot = base[it.key()];
    if (slot.is_object()) {
      merge_into(slot, it.value(), key);
      continue;
    }
    if (!same_kind(slot, it.value()))
      throw ConfigError("config key '" + key + "' expects a value like " + slot.dump() +
                        ", got " + it.value().dump());
    if (prefix.empty() && it.key() == "preset" && it.value() != slot)
      throw ConfigError("config key 'preset' cannot change after the preset is chosen");
    slot = it.value();
  }
}

std::vector<std::string> split_key(std::string_view key) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : key) {
    if (ch == '.') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  parts.push_back(cur);
  for (const auto& p : parts)
    if (p.empty()) throw ConfigError("malformed config key '" + std::string(key) + "'");
  return parts;
}

template <typename T>
T at(const json& doc, const char* section, const char* key) {
  return doc.at(section).at(key).get<T>();
}

}  // namespace

ExperimentConfig ExperimentConfig::preset(std::string_view name) {
  ExperimentConfig c;
  if (name == "toy") {
    c.doc_ = toy_preset();
  } else if (name == "paper") {
    c.doc_ = paper_preset();
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "' (valid: toy, paper)");
  }
  return c;
}

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config document must be a JSON object");
  std::string name = "toy";
  if (doc.contains("preset")) {
    if (!doc["preset"].is_string()) throw ConfigError("config key 'preset' must be a string");
    name = doc["preset"].get<std::string>();
  }
  ExperimentConfig c = preset(name);
  c.merge(doc);
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(doc);
}

void ExperimentConfig::merge(const json& patch) {
  ExperimentConfig next = *this;
  merge_into(next.doc_, patch, "");
  next.validate();
  *this = std::move(next);
}

namespace {

json key_patch(std::string_view key, json value) {
  const auto parts = split_key(key);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) value = json{{*it, value}};
  return value;
}

// Strings stay strings; anything else is parsed as JSON with a string
// fallback.
json parse_override(const json& current, std::string_view value) {
  if (current.is_string()) return std::string(value);
  try {
    return json::parse(value);
  } catch (const json::parse_error&) {
    return std::string(value);
  }
}

}  // namespace

void ExperimentConfig::set(std::string_view key, const json& value) { merge(key_patch(key, value)); }

void ExperimentConfig::set(std::string_view key, std::string_view value) {
  set(key, parse_override(get(key), value));
}

void ExperimentConfig::set_many(const std::vector<std::pair<std::string, std::string>>& overrides) {
  ExperimentConfig next = *this;
  for (const auto& [key, value] : overrides)
    merge_into(next.doc_, key_patch(key, parse_override(next.get(key), value)), "");
  next.validate();
  *this = std::move(next);
}

const json& ExperimentConfig::get(std::string_view key) const {
  const json* node = &doc_;
  std::string walked;
  for (const auto& part : split_key(key)) {
    walked += (walked.empty() ? "" : ".") + part;
    if (!node->is_object() || !node->contains(part))
      throw ConfigError("unknown config key '" + walked + "'");
    node = &(*node)[part];
  }
  return *node;
}

model::ModelConfig ExperimentConfig::model_config(int node_count) const {
  const json& d = doc_;
  model::ModelConfig m;
  m.node_count = node_count;
  m.input_length = at<int>(d, "window", "input_length");
  m.output_length = at<int>(d, "window", "output_length");
  m.vision.feature_dim = at<int>(d, "vision", "feature_dim");
  m.vision.model_dim = at<int>(d, "vision", "model_dim");
  m.vision.residual_blocks = at<int>(d, "vision", "residual_blocks");
  m.vision.heads = at<int>(d, "vision", "heads");
  m.vision.attention_kernel = at<int>(d, "vision", "attention_kernel");
  m.vision.max_groups = at<int>(d, "vision", "groups");
  m.backbone.source = at<std::string>(d, "backbone", "source");
  m.backbone.checkpoint_path = at<std::string>(d, "backbone", "checkpoint");
  m.backbone.layers = at<int>(d, "backbone", "layers");
  m.backbone.hidden_dim = at<int>(d, "backbone", "hidden_dim");
  m.backbone.heads = at<int>(d, "backbone", "heads");
  m.backbone.ffn_multiplier = at<int>(d, "backbone", "ffn_multiplier");
  m.backbone.seed = at<std::uint64_t>(d, "backbone", "seed");
  m.adapter.rank = at<int>(d, "adapter", "rank");
  m.adapter.kernel_sizes = at<std::vector<int>>(d, "adapter", "kernel_sizes");
  m.adapter.lambda_init = at<double>(d, "adapter", "lambda_init");
  m.adapter.lambda_learnable = at<bool>(d, "adapter", "lambda_learnable");
  m.base_channels = at<int>(d, "unet", "base_channels");
  m.channel_mult = at<std::vector<int>>(d, "unet", "channel_mult");
  m.res_blocks = at<int>(d, "unet", "res_blocks");
  m.attention_heads = at<int>(d, "unet", "attention_heads");
  m.max_groups = at<int>(d, "unet", "groups");
  m.diffusion_steps = at<int>(d, "diffusion", "steps");
  m.beta_start = at<double>(d, "diffusion", "beta_start");
  m.beta_end = at<double>(d, "diffusion", "beta_end");
  m.ablation = ablation();
  return m;
}

train::TrainingConfig ExperimentConfig::training() const {
  const json& t = doc_.at("training");
  train::TrainingConfig c;
  c.learning_rate = t.at("learning_rate").get<double>();
  c.min_learning_rate = t.at("min_learning_rate").get<double>();
  c.batch_size = t.at("batch_size").get<int>();
  c.max_epochs = t.at("max_epochs").get<int>();
  c.early_stop_patience = t.at("early_stop_patience").get<int>();
  c.weight_decay = t.at("weight_decay").get<double>();
  c.accumulation_steps = t.at("accumulation_steps").get<int>();
  c.lr_schedule = t.at("lr_schedule").get<std::string>();
  c.precision = t.at("precision").get<std::string>();
  c.max_steps = t.at("max_steps").get<long>();
  c.overfit_samples = t.at("overfit_samples").get<int>();
  c.validate_every = t.at("validate_every").get<int>();
  c.seed = seed();
  return c;
}

train::EvalOptions ExperimentConfig::eval_options() const {
  const json& e = doc_.at("eval");
  const json& df = doc_.at("diffusion");
  train::EvalOptions o;
  o.horizons = e.at("horizons").get<std::vector<int>>();
  o.batch_size = e.at("batch_size").get<int>();
  o.dump_attention = e.at("dump_attention").get<bool>();
  o.max_windows = e.at("max_windows").get<std::size_t>();
  o.seed = seed();
  o.sampler.kind = df.at("sampler").get<std::string>() == "ddpm"
                       ? model::SamplerOptions::ancestral
                       : model::SamplerOptions::implicit;
  o.sampler.ddim.steps = df.at("ddim_steps").get<int>();
  o.sampler.ddim.eta = df.at("eta").get<double>();
  o.sampler.ddim.clip_denoised = df.at("clip_denoised").get<bool>();
  o.sampler.num_samples = df.at("num_samples").get<int>();
  return o;
}

model::Ablation ExperimentConfig::ablation() const {
  return model::parse_ablation(at<std::string>(doc_, "ablation", "variant"));
}

std::uint64_t ExperimentConfig::seed() const { return doc_.at("seed").get<std::uint64_t>(); }

bool ExperimentConfig::deterministic() const { return doc_.at("deterministic").get<bool>(); }

std::array<double, 3> ExperimentConfig::split_ratios() const {
  const auto v = doc_.at("data").at("split").get<std::vector<double>>();
  return {v[0], v[1], v[2]};
}

std::filesystem::path ExperimentConfig::output_dir() const {
  std::filesystem::path p = doc_.at("output_dir").get<std::string>();
  if (p.is_relative()) {
    if (const char* root = std::getenv("TMCAST_OUTPUT_ROOT"); root && *root)
      return std::filesystem::path(root) / p;
  }
  return p;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  auto positive = [&](const char* section, const char* key) {
    if (at<long>(doc_, section, key) < 1)
      fail(std::string(section) + "." + key + " must be positive");
  };
  if (doc_.at("seed").get<long long>() < 0) fail("seed must be nonnegative");
  const json& data = doc_.at("data");
  const std::string format = data.at("format").get<std::string>();
  if (format != "canonical" && format != "csv_rowmajor")
    fail("data.format must be canonical or csv_rowmajor");
  const auto split = data.at("split").get<std::vector<double>>();
  if (split.size() != 3) fail("data.split needs three ratios");
  double total = 0.0;
  for (double r : split) {
    if (r < 0.0) fail("data.split ratios must be nonnegative");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) fail("data.split ratios must sum to 1");
  positive("data", "stride");
  positive("data", "interval");
  const json& syn = data.at("synthetic");
  if (syn.at("nodes").get<int>() < 2) fail("data.synthetic.nodes must be >= 2");
  if (syn.at("length").get<int>() < 1) fail("data.synthetic.length must be >= 1");
  const double rate = syn.at("burst_rate").get<double>();
  if (rate < 0.0 || rate > 1.0) fail("data.synthetic.burst_rate must lie in [0, 1]");

  positive("window", "input_length");
  positive("window", "output_length");
  for (const char* k : {"feature_dim", "model_dim", "heads", "attention_kernel", "groups"})
    positive("vision", k);
  if (at<int>(doc_, "vision", "residual_blocks") < 0) fail("vision.residual_blocks must be >= 0");
  if (at<int>(doc_, "vision", "attention_kernel") % 2 == 0)
    fail("vision.attention_kernel must be odd");
  const std::string source = at<std::string>(doc_, "backbone", "source");
  if (source != "toy_random" && source != "external_checkpoint")
    fail("backbone.source must be toy_random or external_checkpoint");
  if (source == "external_checkpoint" && at<std::string>(doc_, "backbone", "checkpoint").empty())
    fail("backbone.checkpoint is required when backbone.source is external_checkpoint");
  for (const char* k : {"layers", "hidden_dim", "heads", "ffn_multiplier"}) positive("backbone", k);
  if (at<int>(doc_, "backbone", "hidden_dim") % at<int>(doc_, "backbone", "heads") != 0)
    fail("backbone.hidden_dim must be divisible by backbone.heads");
  positive("adapter", "rank");
  const auto kernels = at<std::vector<int>>(doc_, "adapter", "kernel_sizes");
  if (kernels.empty()) fail("adapter.kernel_sizes must not be empty");
  for (int k : kernels)
    if (k < 1 || k % 2 == 0) fail("adapter.kernel_sizes must be positive odd integers");
  for (const char* k : {"base_channels", "res_blocks", "attention_heads", "groups"}) positive("unet", k);
  const auto mult = at<std::vector<int>>(doc_, "unet", "channel_mult");
  if (mult.empty()) fail("unet.channel_mult must not be empty");
  for (int m : mult)
    if (m < 1) fail("unet.channel_mult entries must be positive");

  const json& df = doc_.at("diffusion");
  if (df.at("schedule").get<std::string>() != "linear") fail("diffusion.schedule must be linear");
  const int steps = df.at("steps").get<int>();
  if (steps < 2) fail("diffusion.steps must be >= 2");
  const double b0 = df.at("beta_start").get<double>(), b1 = df.at("beta_end").get<double>();
  if (!(b0 > 0.0 && b0 <= b1 && b1 < 1.0)) fail("diffusion betas must satisfy 0 < beta_start <= beta_end < 1");
  const std::string sampler = df.at("sampler").get<std::string>();
  if (sampler != "ddim" && sampler != "ddpm") fail("diffusion.sampler must be ddim or ddpm");
  const int ddim = df.at("ddim_steps").get<int>();
  if (ddim < 1 || ddim > steps)
    fail("diffusion.ddim_steps must lie in [1, diffusion.steps]");
  if (df.at("eta").get<double>() < 0.0) fail("diffusion.eta must be nonnegative");
  if (df.at("num_samples").get<int>() < 1) fail("diffusion.num_samples must be positive");

  training().validate();

  const json& ev = doc_.at("eval");
  const std::string split_name = ev.at("split").get<std::string>();
  if (split_name != "train" && split_name != "validation" && split_name != "test" &&
      split_name != "overfit")
    fail("eval.split must be train, validation, test or overfit");
  const auto horizons = ev.at("horizons").get<std::vector<int>>();
  if (horizons.empty()) fail("eval.horizons must not be empty");
  for (int h : horizons)
    if (h < 1 || h > at<int>(doc_, "window", "output_length"))
      fail("eval.horizons entry " + std::to_string(h) + " exceeds window.output_length");
  positive("eval", "batch_size");
  if (ev.at("max_windows").get<long>() < 0) fail("eval.max_windows must be nonnegative");
  ablation();
}

}  // namespace tmcast::config
