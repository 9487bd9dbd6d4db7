// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "apu/compress.hpp"
#include "apu/program.hpp"

namespace apu::mapper {

struct MapOptions {
    // Build concrete routing schedules. Off for shape-only programs, where
    // RouteIn cycles come from the L* bound (which the scheduler attains).
    bool materialize_routes = true;
};

// Host-produced activations are striped over the N banks in contiguous runs.
std::vector<std::uint32_t> host_banks(std::size_t n, std::size_t num_banks);

ConvCase select_conv_case(const ir::Conv2D& conv, const AcceleratorConfig& cfg);

LayerPlan map_fc(const std::string& name, const prune::FcStage& st, const Shape& in, const Shape& out,
                 const AcceleratorConfig& cfg, std::vector<std::uint32_t> input_banks, const MapOptions& opts = {});
LayerPlan map_conv(const std::string& name, const prune::ConvStage& st, const Shape& in, const Shape& out,
                   const AcceleratorConfig& cfg, std::vector<std::uint32_t> input_banks, const MapOptions& opts = {});
LayerPlan map_attention(const std::string& name, const prune::AttentionStage& st, const Shape& in,
                        const AcceleratorConfig& cfg, std::vector<std::uint32_t> input_banks,
                        const MapOptions& opts = {});
LayerPlan map_pool(const std::string& name, const prune::PoolStage& st, const Shape& in, const Shape& out,
                   const AcceleratorConfig& cfg, std::vector<std::uint32_t> input_banks);

MappedProgram map_model(const prune::CompressedModel& model, const AcceleratorConfig& cfg, const MapOptions& opts = {});

}  // namespace apu::mapper
