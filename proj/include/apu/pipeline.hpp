// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "apu/compress.hpp"
#include "apu/config.hpp"
#include "apu/costmodel.hpp"
#include "apu/json_io.hpp"
#include "apu/mapper.hpp"
#include "apu/simulator.hpp"

namespace apu {

inline constexpr const char* kToolVersion = "0.1.0";

// .apu container, layer-shape manifest, or network model JSON (compressed
// with `opts` on load).
prune::CompressedModel load_any_model(const std::filesystem::path& path, const AcceleratorConfig& cfg,
                                      const prune::CompressOptions& opts);

struct BaselineSpec {
    std::string kind = "unstructured-sparse";  // dense-sequential, unstructured-sparse, apu
    double macs_per_cycle = 0;                 // 0: kind default
    double penalty = 1.0;                      // random-access cycles per nonzero MAC
    int pointer_bits = 4;                      // index overhead per stored nonzero

    void validate() const;
    double effective_macs_per_cycle(const AcceleratorConfig& cfg) const;
};

struct LayerComparison {
    std::string name, kind;
    std::size_t folds = 0;
    std::uint64_t dense_macs = 0, nonzero_macs = 0;
    std::size_t apu_cycles = 0;
    double baseline_cycles = 0;
    double speedup = 1.0;
    std::optional<double> unfolded_speedup;  // same layer with one PE per block
    std::uint64_t baseline_storage_bits = 0, apu_storage_bits = 0;
};

struct Comparison {
    BaselineSpec baseline;
    std::vector<LayerComparison> layers;
    std::size_t apu_cycles = 0;
    double baseline_cycles = 0;
    double speedup = 1.0;
};

Comparison compare(const prune::CompressedModel& model, const AcceleratorConfig& cfg, const BaselineSpec& baseline);
json comparison_to_json(const Comparison& c);
std::string comparison_to_csv(const Comparison& c);

void write_program_schedules_csv(std::ostream& os, const mapper::MappedProgram& p);
std::uint64_t program_select_bits(const mapper::MappedProgram& p);

json cost_report_json(const AcceleratorConfig& cfg, const sim::SimReport* report, PeMode mode,
                      const cost::CostParams& params, std::uint64_t select_bits, std::size_t route_cycles);

struct PipelineOptions {
    std::filesystem::path model, config, out_dir;
    std::optional<std::filesystem::path> input;
    prune::CompressOptions compress;
    PeMode mode = PeMode::Spatial;
    bool trace = false;
};

// compress -> schedule -> map -> simulate -> cost; returns the run manifest.
json run_pipeline(const PipelineOptions& opts);

}  // namespace apu
