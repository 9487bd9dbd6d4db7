// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "apu/quant.hpp"
#include "apu/tensor.hpp"

namespace apu::ir {

using Pair = std::array<std::size_t, 2>;

struct FullyConnected {
    Tensor weights;  // [out, in]
    Tensor bias;     // [out]
};

struct Conv2D {
    Tensor kernel;  // [C_out, C_in/groups, H_k, W_k]
    Tensor bias;    // [C_out]
    Pair stride{1, 1};
    Pair padding{0, 0};
    std::size_t groups = 1;

    std::size_t out_channels() const { return kernel.dim(0); }
    std::size_t in_channels() const { return kernel.dim(1) * groups; }
    std::size_t kh() const { return kernel.dim(2); }
    std::size_t kw() const { return kernel.dim(3); }
};

struct MaxPool2D {
    Pair window{2, 2};
    Pair stride{2, 2};
    Pair padding{0, 0};
};

struct BatchNorm {
    Tensor gamma, beta, mean, variance;  // [C]
    double epsilon = 1e-5;
};

// Self-attention over a [seq, d_model] input.
struct MultiHeadAttention {
    std::size_t heads = 1;
    std::size_t d_model = 0;
    std::size_t d_k = 0;
    Tensor w_q, w_k, w_v;  // [heads, d_k, d_model]
    Tensor w_o;            // [heads, d_model, d_k]
};

struct ReLU {};

using LayerOp = std::variant<FullyConnected, Conv2D, MaxPool2D, BatchNorm, MultiHeadAttention, ReLU>;

struct Layer {
    std::string name;
    LayerOp op;

    std::string type_name() const;
};

struct NetworkModel {
    std::string name;
    Shape input_shape;
    std::vector<Layer> layers;
};

// Output shape of one layer; throws ShapeError naming the layer.
Shape output_shape(const Layer& layer, const Shape& input);
// Shapes[i] is the input of layer i; the last entry is the model output.
std::vector<Shape> layer_shapes(const NetworkModel& model);
void validate(const NetworkModel& model);

NetworkModel load_model(const std::filesystem::path& path);
NetworkModel parse_model(const std::string& text, const std::string& origin = "model");
std::string dump_model(const NetworkModel& model);

// Per-tensor maxima of |x| seen during a real-mode evaluation, keyed by
// layer name (and "name/q", "name/k", "name/v", "name/head" for attention).
using ActivationObserver = std::function<void(const std::string& key, double max_abs)>;

// Layer-by-layer evaluation. With quant == nullptr the arithmetic is real
// (double); otherwise integer with requantization at every layer boundary,
// and the returned tensor holds activation codes.
Tensor reference_eval(const NetworkModel& model, const Tensor& input, const QuantSpec* quant = nullptr,
                      const ActivationObserver& observe = {});

Tensor quantize_input(const Tensor& input, const QuantSpec& quant);

}  // namespace apu::ir
