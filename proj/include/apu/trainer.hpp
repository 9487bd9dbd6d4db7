// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "apu/model.hpp"
#include "apu/pruner.hpp"

namespace apu::prune {

struct Dataset {
    std::vector<std::vector<double>> inputs;
    std::vector<std::size_t> labels;
    std::size_t num_classes = 2;

    std::size_t size() const { return inputs.size(); }
};

// Two interleaved arms, one per class, `turns` revolutions each.
Dataset make_spiral(std::size_t per_class, std::uint64_t seed, double noise = 0.04, double turns = 1.0);
// Two Gaussian blobs on either side of a random line through the origin.
Dataset make_linear_separable(std::size_t n, std::uint64_t seed);

// FC layers with ReLU between them; He-uniform init, zero bias.
ir::NetworkModel make_mlp(const std::string& name, const std::vector<std::size_t>& sizes, std::uint64_t seed);

struct TrainOptions {
    std::size_t epochs = 100;
    double learning_rate = 0.05;
    double momentum = 0.9;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
};

// Called after every optimizer step with the current FC weights (row-major,
// one entry per FC layer in model order).
using StepObserver = std::function<void(std::size_t step, const std::vector<const std::vector<double>*>& weights)>;

struct TrainResult {
    ir::NetworkModel model;
    std::vector<double> epoch_loss;
};

// SGD on softmax cross-entropy for FC/ReLU models. Masks (by layer name) are
// re-applied after every step; layers without a mask stay dense. With a
// quant spec the forward pass sees quantized weights (straight-through), and
// the returned weights are projected onto the grid.
TrainResult train_structured(const ir::NetworkModel& model, const Dataset& data,
                             const std::map<std::string, BlockMask>& masks, const QuantSpec* quant,
                             const TrainOptions& opts, const StepObserver& observer = {});

double accuracy(const ir::NetworkModel& model, const Dataset& data);

}  // namespace apu::prune
