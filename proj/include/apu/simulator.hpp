// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "apu/json_io.hpp"
#include "apu/program.hpp"

namespace apu::sim {

std::size_t adder_stages(std::size_t n);

// Pairwise reduction; each stage is one bit wider than the last, an odd
// element passes through to the next stage unchanged.
struct AdderTree {
    std::size_t inputs = 0;
    int product_bits = 8;

    std::size_t stages() const { return adder_stages(inputs); }
    int stage_width(std::size_t stage) const { return product_bits + static_cast<int>(stage); }
    int final_width() const { return stage_width(stages()); }
    std::int64_t eval(std::span<const std::int64_t> products) const;
};

std::int64_t adder_tree_eval(std::span<const std::int64_t> products, int product_bits);

struct PeOutputConfig {
    double acc_scale = 1.0;
    double out_scale = 1.0;
    int bits = 4;
    bool relu = false;
    bool raw = false;  // emit the full-width sum (host finishes the activation)
};

// One PE: the weight SRAM holds integer operands (decoded codes), the latch
// the routed activations.
struct PeState {
    std::size_t rows = 0, cols = 0;
    std::span<const std::int64_t> weights;  // [rows, cols]
    std::span<const std::int64_t> bias;     // [rows], empty = zero
    std::vector<std::int64_t> latch;    // [cols]
    int operand_bits = 4;
    int activation_bits = 4;
    std::size_t cursor = 0;
    PeMode mode = PeMode::Spatial;
    int acc_bits = 64;
    std::vector<std::int64_t> psum;  // temporal only, [rows]
};

// Spatial datapath: one weight row against the latch, bias at full tree
// width, ReLU, one rounding. One call is one cycle.
std::int64_t pe_output_step(PeState& pe, std::size_t row, const PeOutputConfig& out);

// Temporal datapath: one latch column updates every partial sum.
void pe_temporal_step(PeState& pe, std::size_t col);
int temporal_acc_bits(int operand_bits, int activation_bits, std::size_t pe_cols);

struct LayerTiming {
    std::string name;
    std::string kind;
    std::size_t start = 0;
    std::size_t cycles = 0;
    std::map<std::string, std::size_t> phase_cycles;
    std::size_t folds = 0;
    std::size_t busy = 0;  // PE-cycles
    double utilization = 0.0;
    double compute_utilization = 0.0;
};

struct SimReport {
    std::string program;
    PeMode mode = PeMode::Spatial;
    std::size_t total_cycles = 0;
    std::map<std::string, std::size_t> phase_cycles;
    std::vector<std::size_t> pe_busy;
    double utilization = 0.0;
    double compute_utilization = 0.0;
    std::size_t ops_per_pe_cycle = 0;
    std::uint64_t normalized_ops = 0;
    std::vector<LayerTiming> layers;
    std::optional<Tensor> output;
};

struct SimOptions {
    PeMode mode = PeMode::Spatial;
    std::ostream* trace = nullptr;  // CSV: cycle,unit,event
};

SimReport simulate_timing(const mapper::MappedProgram& program, const SimOptions& opts = {});

// Bit-exact execution. Input is real (quantized with the input scale) or
// integer codes.
SimReport simulate(const mapper::MappedProgram& program, const Tensor& input, const SimOptions& opts = {});

json report_to_json(const SimReport& r);

}  // namespace apu::sim
