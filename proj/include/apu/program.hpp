// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "apu/config.hpp"
#include "apu/model.hpp"
#include "apu/quant.hpp"
#include "apu/scheduler.hpp"

namespace apu::mapper {

enum class ConvCase { None, I, II, III };
std::string to_string(ConvCase c);

// Attention sub-steps; None for plain matmul layers.
enum class AttnStep { None, Project, Scores, Mix, Output };
std::string to_string(AttnStep s);

// im2col addressing for one lowered matmul. Column k of a conv block is the
// unrolled kernel index c*KH*KW + ky*KW + kx; position q is oy*OW + ox.
struct Geometry {
    bool conv = false;
    std::size_t in_size = 0;
    std::size_t C = 0, H = 0, W = 0, KH = 1, KW = 1, SH = 1, SW = 1, PH = 0, PW = 0, OH = 1, OW = 1;

    std::size_t positions() const { return conv ? OH * OW : 1; }
    std::optional<std::size_t> input_index(std::size_t col, std::size_t pos) const;
    std::size_t output_index(std::size_t row, std::size_t pos) const { return row * positions() + pos; }
};

struct LoweredBlock {
    std::vector<std::size_t> rows;  // output channels / neurons
    std::vector<std::size_t> cols;  // unrolled input columns
    Tensor weights;                 // codes [rows, cols]
    Tensor bias;                    // accumulator-unit ints [rows]; zeros when the host adds it
};

struct PeTask {
    std::size_t block = 0;     // block index, or head for attention
    std::size_t position = 0;  // conv output position, or sequence step for attention
    bool operator==(const PeTask&) const = default;
};

using TaskList = std::vector<std::optional<PeTask>>;  // one slot per PE

struct RouteIn {
    std::size_t fold = 0;
    std::size_t cycles = 0;
    std::size_t transfers = 0;
    std::shared_ptr<const sched::RoutingSchedule> schedule;  // null for shape-only programs
};

struct Compute {
    std::size_t fold = 0;
    TaskList tasks;
    std::size_t spatial_cycles = 0;
    std::size_t temporal_cycles = 0;
    AttnStep step = AttnStep::None;
};

struct WeightLoad {
    std::size_t fold = 0;
    std::size_t cycles = 0;
    std::vector<std::uint8_t> pes;  // which PEs rewrite their SRAM
    AttnStep step = AttnStep::None;
};

// Input latch written from PE-local or host buffers (attention only).
struct LatchFill {
    std::size_t fold = 0;
    std::size_t cycles = 0;
    AttnStep step = AttnStep::None;
};

struct HostOp {
    HostOpKind kind = HostOpKind::Add;
    std::size_t count = 0;
    std::size_t cycles = 0;
};

struct Sync {};

using Phase = std::variant<RouteIn, Compute, WeightLoad, LatchFill, HostOp, Sync>;
std::string phase_name(const Phase& p);

struct MatmulPlan {
    Geometry geom;
    std::vector<LoweredBlock> blocks;
    ConvCase conv_case = ConvCase::None;
    bool relu = false;
    bool host_reduce = false;  // case II: PEs emit raw partial sums
    std::size_t col_tiles = 1;
    std::vector<std::int64_t> host_bias;  // case II, per output channel
};

struct AttentionPlan {
    ir::MultiHeadAttention mha;  // codes
    std::size_t seq = 0;
};

struct PoolPlan {
    ir::MaxPool2D pool;
    bool passthrough = false;
};

struct ReluPlan {};

struct LayerPlan {
    std::string name;
    std::string kind;  // fc, conv, pool, relu, attention
    Shape input_shape, output_shape;
    std::variant<MatmulPlan, AttentionPlan, PoolPlan, ReluPlan> op;
    std::vector<Phase> phases;
    std::size_t folds = 0;
    std::vector<std::uint32_t> input_banks;   // source bank of each input activation
    std::vector<std::uint32_t> output_banks;  // where each output lands
    LayerQuant quant;
    double input_scale = 1.0;
    double output_scale = 1.0;
};

struct MappedProgram {
    std::string name;
    AcceleratorConfig config;
    Shape input_shape;
    QuantSpec quant;
    bool shape_only = false;
    std::vector<LayerPlan> layers;
};

// Latch contents of each PE for a compute phase: slot -> input activation
// index (nullopt = zero padding). Shared by the router and the simulator.
std::vector<std::vector<std::optional<std::size_t>>> latch_plan(const LayerPlan& layer, const Compute& c);

std::string dump_program(const MappedProgram& p);

}  // namespace apu::mapper
