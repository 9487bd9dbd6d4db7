// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "apu/json_io.hpp"

namespace apu {

enum class PeMode { Spatial, Temporal };
std::string to_string(PeMode m);
PeMode parse_pe_mode(const std::string& s);

enum class Interconnect { Mux, Clos, Crossbar };
std::string to_string(Interconnect k);
Interconnect parse_interconnect(const std::string& s);

enum class HostOpKind { Compare, Add, Activation, Relu, Softmax };
std::string to_string(HostOpKind k);

struct AcceleratorConfig {
    std::size_t num_pes = 10;
    std::size_t pe_rows = 400;  // H_PE
    std::size_t pe_cols = 400;  // W_PE
    int weight_bits = 4;
    int activation_bits = 4;
    double clock_hz = 1e9;
    std::map<HostOpKind, std::size_t> host_op_cycles{{HostOpKind::Compare, 1},
                                                     {HostOpKind::Add, 1},
                                                     {HostOpKind::Activation, 1},
                                                     {HostOpKind::Relu, 1},
                                                     {HostOpKind::Softmax, 8}};
    Interconnect interconnect = Interconnect::Mux;
    std::size_t reload_cycles_per_row = 1;
    bool overlap_routing = false;
    double watts = 0.44;  // calibration input for TOPS/W

    std::size_t weight_sram_bits() const { return pe_rows * pe_cols * static_cast<std::size_t>(weight_bits); }
    std::size_t host_cycles(HostOpKind kind, std::size_t count) const;
    void validate() const;
};

AcceleratorConfig config_from_json(const json& j);
json config_to_json(const AcceleratorConfig& c);
AcceleratorConfig load_config(const std::filesystem::path& path);
// Digest of the canonical JSON form.
std::string config_hash(const AcceleratorConfig& c);

}  // namespace apu
