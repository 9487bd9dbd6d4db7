// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "apu/config.hpp"
#include "apu/json_io.hpp"
#include "apu/simulator.hpp"

namespace apu::cost {

// Relative units: one 4-bit multiply plus its 8-bit accumulate costs 1.0.
struct CostParams {
    double e_sram_bit = 0.015;    // per weight bit read
    double alpha = 0.15;          // read cost growth with log2(array bits)
    double e_sram_array = 0.002;  // per stored bit per access (bitline load)
    double e_mul4 = 0.84;         // one 4x4-bit multiply
    double mul_gamma = 0.75;      // extra superlinear growth of wider multipliers
    double e_add_bit = 0.02;
    double e_rf_bit = 0.08;   // temporal partial-sum register file, per bit per cycle
    double e_quant_bit = 0.05;
    double e_io_bit = 0.12;   // latch write through the routing network
    double offchip_ratio = 10.0;     // off-chip DRAM vs on-chip SRAM, per bit
    double near_memory_factor = 3.0;  // distant shared SRAM vs PE-local SRAM, per bit

    double a_sram_bit = 1.0;
    double a_mul_bit2 = 6.0;  // per multiplier bit squared
    double a_add_bit = 8.0;
    double a_rf_bit = 4.0;
    double a_quant_bit = 8.0;
    double a_io_bit = 2.0;

    void validate() const;
};

CostParams params_from_json(const json& j);
json params_to_json(const CostParams& p);

double multiplier_energy(int bits, const CostParams& p);

struct Breakdown {
    double weight_sram = 0, multipliers = 0, adder_tree = 0, register_file = 0, quantizer = 0, routing = 0;

    double memory() const { return weight_sram + register_file; }
    double compute() const { return multipliers + adder_tree; }
    double total() const { return weight_sram + multipliers + adder_tree + register_file + quantizer + routing; }
};

struct CostReport {
    std::size_t rows = 0, cols = 0;
    int weight_bits = 4;
    int activation_bits = 4;
    PeMode mode = PeMode::Spatial;
    Breakdown energy;  // per PE cycle
    Breakdown area;
    std::size_t ops_per_cycle = 0;
    double energy_per_op = 0;
    // Filled by throughput().
    double tops = 0, effective_tops = 0, tops_per_watt = 0;
};

// activation_bits defaults to the weight width.
CostReport pe_cost(std::size_t rows, std::size_t cols, int weight_bits, PeMode mode, const CostParams& p = {},
                   int activation_bits = 0);

std::vector<CostReport> precision_sweep(std::size_t rows, std::size_t cols, const std::vector<int>& bits,
                                        PeMode mode = PeMode::Spatial, const CostParams& p = {});

std::uint64_t interconnect_memory(Interconnect kind, std::size_t n, std::size_t schedule_len);

struct Throughput {
    std::size_t ops_per_pe_cycle = 0;
    double peak_tops = 0;
    double effective_tops = 0;  // scaled by the simulated utilization
    double tops_per_watt = 0;
};

Throughput throughput(const AcceleratorConfig& cfg, const sim::SimReport* report, double watts);

json cost_to_json(const CostReport& r);

// Design-space sweep: spec lists block sizes, bit widths, interconnects and
// modes; one CSV row per point, in spec order regardless of `jobs`.
struct SweepSpec {
    std::vector<std::size_t> block_sizes{200, 256, 400, 512, 1024, 2048};
    std::vector<int> bits{4, 8, 16};
    std::vector<Interconnect> interconnects{Interconnect::Mux, Interconnect::Clos, Interconnect::Crossbar};
    std::vector<PeMode> modes{PeMode::Spatial};
    std::size_t num_pes = 10;
    CostParams params;
};

SweepSpec sweep_from_json(const json& j);
SweepSpec load_sweep(const std::filesystem::path& path);
void run_sweep(const SweepSpec& spec, std::ostream& csv, std::size_t jobs);

}  // namespace apu::cost
