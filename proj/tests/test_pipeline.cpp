// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <sstream>

#include "apu/digest.hpp"
#include "apu/error.hpp"
#include "apu/manifest.hpp"
#include "apu/pipeline.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace apu;
namespace fs = std::filesystem;
using apu::testing::source_dir;

TEST_CASE("comparing against the accelerator itself gives unit speedup") {
    const auto cfg = load_config(source_dir() / "configs/fc_compare_512x9.json");
    const auto cm = load_manifest(source_dir() / "manifests/fc_compare.json", cfg, 1);
    BaselineSpec b;
    b.kind = "apu";
    const auto c = compare(cm, cfg, b);
    for (const auto& l : c.layers) CHECK(l.speedup == doctest::Approx(1.0));
    CHECK(c.speedup == doctest::Approx(1.0));
}

TEST_CASE("structured layers beat the unstructured baseline, less so when folded") {
    const auto cfg = load_config(source_dir() / "configs/fc_compare_512x9.json");
    const auto cm = load_manifest(source_dir() / "manifests/fc_compare.json", cfg, 1);
    const auto c = compare(cm, cfg, BaselineSpec{});
    bool saw_fold = false;
    for (const auto& l : c.layers) {
        INFO(l.name);
        CHECK(l.speedup >= 2.0);
        if (l.folds > 1) {
            saw_fold = true;
            REQUIRE(l.unfolded_speedup);
            CHECK(l.speedup < *l.unfolded_speedup);
        }
    }
    CHECK(saw_fold);
    const auto csv = comparison_to_csv(c);
    CHECK(csv.rfind("layer,kind,folds,dense_macs,nonzero_macs,apu_cycles,baseline_cycles,speedup,unfolded_speedup\n", 0) ==
          0);
}

TEST_CASE("baseline validation") {
    BaselineSpec b;
    b.kind = "magic";
    CHECK_THROWS_AS(b.validate(), InputError);
    b.kind = "unstructured-sparse";
    b.penalty = 0.5;
    CHECK_THROWS_AS(b.validate(), InputError);
}

TEST_CASE("manifests reject unknown layer types") {
    AcceleratorConfig cfg;
    json j{{"kind", "layer-manifest"}, {"layers", json::array({json{{"type", "lstm"}}})}};
    CHECK_THROWS_AS(manifest_from_json(j, cfg, 0), InputError);
}

TEST_CASE("pipeline writes every artifact and is reproducible") {
    const fs::path a = fs::temp_directory_path() / "apu_pipe_a", b = fs::temp_directory_path() / "apu_pipe_b";
    fs::remove_all(a);
    fs::remove_all(b);
    PipelineOptions o;
    o.model = source_dir() / "models/lenet300.json";
    o.config = source_dir() / "configs/apu16.json";
    o.compress.num_blocks = 10;
    o.compress.seed = 42;
    o.out_dir = a;
    const auto m1 = run_pipeline(o);
    o.out_dir = b;
    const auto m2 = run_pipeline(o);
    CHECK(m1 == m2);
    for (const char* f : {"model.apu", "program.txt", "schedule.csv", "sim_report.json", "cost_report.json",
                          "manifest.json"}) {
        INFO(f);
        REQUIRE(fs::exists(a / f));
        CHECK(read_file(a / f) == read_file(b / f));
    }
    CHECK(m1["oracle"] == "match");
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("missing config names the path") {
    PipelineOptions o;
    o.model = source_dir() / "models/lenet300.json";
    o.config = "/nonexistent/cfg.json";
    o.out_dir = fs::temp_directory_path() / "apu_pipe_missing";
    try {
        run_pipeline(o);
        FAIL("expected an error");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("/nonexistent/cfg.json") != std::string::npos);
    }
}
