// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "tmcast/checkpoint.hpp"
#include "tmcast/error.hpp"
#include "tmcast/training.hpp"

using namespace tmcast;
using nlohmann::json;

namespace {

void flip_last_data_byte(const std::filesystem::path& path, std::uintmax_t back) {
  std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
  const auto size = std::filesystem::file_size(path);
  f.seekg(static_cast<std::streamoff>(size - back));
  char c = 0;
  f.get(c);
  f.seekp(static_cast<std::streamoff>(size - back));
  f.put(static_cast<char>(c ^ 0x5a));
}

}  // namespace

TEST_SUITE("checkpoint") {
  TEST_CASE("save then load reproduces weights, schedule and metrics bitwise") {
    const auto dir = test::scratch_dir("checkpoint_roundtrip");
    const auto syn = data::generate_synthetic(6, 80, 2, 0.05);
    const auto d = train::prepare_data(syn.series, image::ImageMode::rgb, 4, 1, {0.7, 0.1, 0.2}, 1, 0);
    model::Forecaster a(test::micro_model(), 1);
    nn::Rng rng(2);
    for (auto& e : a.params().entries())
      if (e.trainable) e.var.mutable_value() = nn::randn(e.var.shape(), rng, 0.1);
    a.set_schedule(diffusion::NoiseSchedule::linear(20, 2e-3, 0.3));
    io::save_checkpoint(dir / "m.tmc", a, json{{"note", "x"}}, json{{"steps", 5}});

    model::Forecaster b(test::micro_model(), 99);
    io::load_parameters(dir / "m.tmc", b);
    for (const auto& s : a.params().sections())
      CHECK(io::section_checksum(a.params(), s) == io::section_checksum(b.params(), s));
    CHECK(a.schedule().betas() == b.schedule().betas());

    train::EvalOptions o;
    o.sampler.ddim.steps = 5;
    o.max_windows = 3;
    const auto ra = train::evaluate(a, d.test, d.test_origins, o);
    const auto rb = train::evaluate(b, d.test, d.test_origins, o);
    CHECK(ra.row("model", 1).sample_rmse == rb.row("model", 1).sample_rmse);
    CHECK(ra.row("model", 1).sample_mae == rb.row("model", 1).sample_mae);

    const json header = io::read_checkpoint_header(dir / "m.tmc");
    CHECK(header["config"]["note"] == "x");
    CHECK(header["metadata"]["steps"] == 5);
    CHECK(header["version"] == io::kCheckpointVersion);
  }

  TEST_CASE("inspection recomputes checksums and counts") {
    const auto dir = test::scratch_dir("checkpoint_inspect");
    model::Forecaster m(test::micro_model(), 3);
    io::save_checkpoint(dir / "m.tmc", m, json::object());
    const json info = io::inspect_checkpoint(dir / "m.tmc");
    CHECK(info["verified"] == true);
    CHECK(info["schedule"]["steps"] == 20);
    bool saw_backbone = false;
    for (const auto& s : info["sections"]) {
      CHECK(s["verified"] == true);
      CHECK(s["sha256"] == io::section_checksum(m.params(), s["name"].get<std::string>()));
      if (s["name"] == "backbone") {
        saw_backbone = true;
        CHECK(s["trainable"] == 0);
        CHECK(s["frozen"].get<long>() > 0);
      }
    }
    CHECK(saw_backbone);
  }

  TEST_CASE("corrupted data fails the checksum") {
    const auto dir = test::scratch_dir("checkpoint_corrupt");
    model::Forecaster m(test::micro_model(), 4);
    io::save_checkpoint(dir / "m.tmc", m, json::object());
    // The schedule is stored last; corrupt a byte inside the final parameter.
    flip_last_data_byte(dir / "m.tmc", 20 * sizeof(double) + 3);
    model::Forecaster other(test::micro_model(), 4);
    CHECK_THROWS_AS(io::load_parameters(dir / "m.tmc", other), ValidationError);
    CHECK(io::inspect_checkpoint(dir / "m.tmc")["verified"] == false);

    io::save_checkpoint(dir / "s.tmc", m, json::object());
    flip_last_data_byte(dir / "s.tmc", 3);
    CHECK_THROWS_AS(io::load_parameters(dir / "s.tmc", other), ValidationError);
  }

  TEST_CASE("missing files, foreign files and mismatched models are rejected") {
    const auto dir = test::scratch_dir("checkpoint_errors");
    CHECK_THROWS_AS(io::read_checkpoint_header(dir / "absent.tmc"), FileError);
    {
      std::ofstream f(dir / "junk.tmc", std::ios::binary);
      f << "not a checkpoint at all";
    }
    CHECK_THROWS_AS(io::read_checkpoint_header(dir / "junk.tmc"), ValidationError);
    model::Forecaster m(test::micro_model(), 5);
    io::save_checkpoint(dir / "m.tmc", m, json::object());
    model::Forecaster wider(test::micro_model(model::Ablation::full, 6, 4, 2), 5);
    CHECK_THROWS_AS(io::load_parameters(dir / "m.tmc", wider), ValidationError);
    model::Forecaster bypass(test::micro_model(model::Ablation::no_llm), 5);
    CHECK_THROWS_AS(io::load_parameters(dir / "m.tmc", bypass), ValidationError);
  }

  TEST_CASE("the backbone section loads on its own") {
    const auto dir = test::scratch_dir("checkpoint_backbone");
    model::Forecaster m(test::micro_model(), 6);
    io::save_checkpoint(dir / "m.tmc", m, json::object());
    nn::ParamStore store;
    model::FrozenBackbone bb(store, test::micro_model().backbone);
    for (auto& e : store.entries()) e.var.mutable_value().fill(0.0);
    io::load_backbone_section(dir / "m.tmc", store);
    CHECK(io::section_checksum(store, "backbone") == io::section_checksum(m.params(), "backbone"));
    model::Forecaster bypass(test::micro_model(model::Ablation::no_llm), 5);
    io::save_checkpoint(dir / "b.tmc", bypass, json::object());
    CHECK_THROWS_AS(io::load_backbone_section(dir / "b.tmc", store), ValidationError);
  }

  TEST_CASE("sha256 of a known string") {
    const std::string abc = "abc";
    CHECK(io::sha256_hex(abc.data(), abc.size()) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }
}
