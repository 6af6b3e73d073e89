// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "helpers.hpp"
#include "tmcast/config.hpp"
#include "tmcast/error.hpp"

using namespace tmcast;
using config::ExperimentConfig;
using nlohmann::json;

TEST_SUITE("config") {
  TEST_CASE("toy preset values") {
    const auto c = ExperimentConfig::preset("toy");
    CHECK(c.get("window.input_length") == 8);
    CHECK(c.get("backbone.hidden_dim") == 128);
    CHECK(c.get("unet.base_channels") == 16);
    CHECK(c.get("diffusion.steps") == 200);
    CHECK(c.deterministic());
    const auto m = c.model_config(6);
    CHECK(m.node_count == 6);
    CHECK(m.diffusion_steps == 200);
    CHECK(m.ablation == model::Ablation::full);
    const auto t = c.training();
    CHECK(t.max_epochs <= 50);
    CHECK_NOTHROW(t.validate());
  }

  TEST_CASE("paper preset carries the published hyperparameters") {
    const auto c = ExperimentConfig::preset("paper");
    CHECK(c.get("diffusion.steps") == 1000);
    CHECK(c.get("diffusion.beta_start") == 1e-4);
    CHECK(c.get("diffusion.beta_end") == 0.02);
    CHECK(c.get("diffusion.ddim_steps") == 50);
    CHECK(c.get("diffusion.eta") == 0.0);
    CHECK(c.get("unet.base_channels") == 32);
    CHECK(c.get("unet.channel_mult") == json{1, 2, 4});
    const auto t = c.training();
    CHECK(t.learning_rate == 3e-5);
    CHECK(t.batch_size == 32);
    CHECK(t.max_epochs == 300);
    CHECK(t.early_stop_patience == 30);
    CHECK_THROWS_AS(ExperimentConfig::preset("huge"), ConfigError);
  }

  TEST_CASE("a snapshot reloads to an equal configuration") {
    const auto dir = test::scratch_dir("config_snapshot");
    auto c = ExperimentConfig::preset("toy");
    c.set("seed", "13");
    c.set("training.learning_rate", "0.01");
    c.set("output_dir", "somewhere/else");
    {
      std::ofstream f(dir / "c.json");
      f << c.dump();
    }
    const auto back = ExperimentConfig::load(dir / "c.json");
    CHECK(back == c);
    CHECK(back.seed() == 13);
    CHECK(ExperimentConfig::from_json(json::parse(c.dump())) == c);
  }

  TEST_CASE("dotted overrides parse JSON and fall back to strings") {
    auto c = ExperimentConfig::preset("toy");
    c.set("unet.channel_mult", "[1, 2]");
    CHECK(c.model_config(6).channel_mult == std::vector<int>{1, 2});
    c.set("ablation.variant", "no_cseq");
    CHECK(c.ablation() == model::Ablation::no_cseq);
    c.set("diffusion.sampler", "ddpm");
    CHECK(c.eval_options().sampler.kind == model::SamplerOptions::ancestral);
  }

  TEST_CASE("unknown keys, type changes and invalid values are rejected") {
    auto c = ExperimentConfig::preset("toy");
    CHECK_THROWS_AS(c.set("training.learning_rat", "0.1"), ConfigError);
    CHECK_THROWS_AS(c.set("nonsense", "1"), ConfigError);
    CHECK_THROWS_AS(c.set("training.batch_size", "\"eight\""), ConfigError);
    CHECK_THROWS_AS(c.set("training.batch_size", "2.5"), ConfigError);
    CHECK_THROWS_AS(c.set("diffusion.ddim_steps", "500"), ConfigError);
    CHECK_THROWS_AS(c.set("ablation.variant", "foo"), ConfigError);
    CHECK_THROWS_AS(c.set("data.split", "[0.5, 0.5, 0.5]"), ConfigError);
    CHECK_THROWS_AS(c.set("preset", "paper"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"training", {{"epochs", 3}}}}), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(json::array()), ConfigError);
    // A failed override leaves the document unchanged.
    CHECK(c == ExperimentConfig::preset("toy"));
  }

  TEST_CASE("fp32 precision is rejected with a clear message") {
    auto c = ExperimentConfig::preset("toy");
    try {
      c.set("training.precision", "fp32");
      c.training().validate();
      FAIL("fp32 accepted");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("fp64") != std::string::npos);
    }
  }

  TEST_CASE("relative output directories resolve against TMCAST_OUTPUT_ROOT") {
    auto c = ExperimentConfig::preset("toy");
    ::setenv("TMCAST_OUTPUT_ROOT", "/tmp/tmcast_root", 1);
    CHECK(c.output_dir() == std::filesystem::path("/tmp/tmcast_root/runs/toy"));
    c.set("output_dir", "/abs/run");
    CHECK(c.output_dir() == std::filesystem::path("/abs/run"));
    ::unsetenv("TMCAST_OUTPUT_ROOT");
    c.set("output_dir", "rel");
    CHECK(c.output_dir() == std::filesystem::path("rel"));
  }

  TEST_CASE("file errors") {
    const auto dir = test::scratch_dir("config_files");
    CHECK_THROWS_AS(ExperimentConfig::load(dir / "missing.json"), FileError);
    {
      std::ofstream f(dir / "bad.json");
      f << "{ not json";
    }
    CHECK_THROWS_AS(ExperimentConfig::load(dir / "bad.json"), ConfigError);
    {
      std::ofstream f(dir / "paper.json");
      f << R"({"preset": "paper", "seed": 3})";
    }
    const auto p = ExperimentConfig::load(dir / "paper.json");
    CHECK(p.get("diffusion.steps") == 1000);
    CHECK(p.seed() == 3);
  }
}
