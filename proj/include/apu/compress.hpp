// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "apu/model.hpp"
#include "apu/pruner.hpp"

namespace apu::prune {

// Compressed stages. All weights are quantization codes; biases are integers
// in accumulator units. ReLU following an FC or conv layer is fused.
struct FcStage {
    BlockDiagonalLayer layer;
    bool relu = false;
};

struct ConvStage {
    ir::Conv2D conv;
    bool relu = false;
};

struct PoolStage {
    ir::MaxPool2D pool;
};

struct ReluStage {};

struct AttentionStage {
    ir::MultiHeadAttention mha;
};

using StageOp = std::variant<FcStage, ConvStage, PoolStage, ReluStage, AttentionStage>;

struct CompressedLayer {
    std::string name;
    Shape input_shape;
    Shape output_shape;
    StageOp op;

    std::string kind() const;
};

struct CompressedModel {
    std::string name;
    Shape input_shape;
    std::vector<CompressedLayer> layers;
    QuantSpec quant;
    bool shape_only = false;
    // Layer-shape manifests: every layer reads fresh host-striped inputs.
    bool independent_layers = false;

    Shape output_shape() const { return layers.empty() ? input_shape : layers.back().output_shape; }
};

struct CompressOptions {
    std::size_t num_blocks = 10;
    std::map<std::string, std::size_t> layer_blocks;  // per-layer override
    std::map<std::string, BlockMask> masks;           // explicit masks win over generated ones
    int weight_bits = 4;
    int activation_bits = 4;
    QuantScheme scheme = QuantScheme::UniformSymmetric;
    std::uint64_t seed = 0;
    std::size_t calibration_samples = 16;
    std::vector<Tensor> calibration_inputs;  // if empty, seeded uniform [-1, 1)
};

CompressedModel compress(const ir::NetworkModel& model, const CompressOptions& opts);

// Integer network with decoded weights; reference_eval(to_network_model(c),
// x, &c.quant) is the bit-exact oracle for the simulator.
ir::NetworkModel to_network_model(const CompressedModel& model);

// Container: "APUC", u32 version, u64 header length, sha256(header),
// header JSON, payload. The header carries the payload digest.
void save_compressed(const CompressedModel& model, const std::filesystem::path& path);
CompressedModel load_compressed(const std::filesystem::path& path);
std::string serialize_compressed(const CompressedModel& model);
CompressedModel deserialize_compressed(const std::string& bytes, const std::string& origin);

}  // namespace apu::prune
