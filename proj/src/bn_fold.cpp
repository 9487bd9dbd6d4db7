// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#include "apu/bn_fold.hpp"

#include <cmath>

#include "apu/error.hpp"

namespace apu::mapper {

namespace {

struct Affine {
    std::vector<double> scale, shift;
};

Affine bn_affine(const ir::BatchNorm& bn) {
    if (!bn.gamma.has_data()) throw InputError("batch norm parameters are shape-only");
    Affine a;
    const std::size_t C = bn.gamma.numel();
    for (std::size_t c = 0; c < C; ++c) {
        const double var = bn.variance.value(c) + bn.epsilon;
        if (!(var > 0.0)) throw InputError("batch norm variance + epsilon must be > 0");
        const double g = bn.gamma.value(c) / std::sqrt(var);
        a.scale.push_back(g);
        a.shift.push_back(bn.beta.value(c) - bn.mean.value(c) * g);
    }
    return a;
}

}  // namespace

ir::Layer fold_batchnorm(const ir::BatchNorm& bn, const ir::Layer& prev) {
    const std::size_t C = bn.gamma.numel();
    ir::Layer out = prev;
    if (auto* fc = std::get_if<ir::FullyConnected>(&out.op)) {
        if (fc->weights.dim(0) != C)
            throw ShapeError("cannot fold batch norm with " + std::to_string(C) + " channels into '" + prev.name +
                             "' with " + std::to_string(fc->weights.dim(0)) + " outputs");
        const auto a = bn_affine(bn);
        const std::size_t in = fc->weights.dim(1);
        std::vector<double> w(C * in), b(C);
        for (std::size_t r = 0; r < C; ++r) {
            for (std::size_t c = 0; c < in; ++c) w[r * in + c] = fc->weights.value(r * in + c) * a.scale[r];
            b[r] = (fc->bias.value(r) - bn.mean.value(r)) * a.scale[r] + bn.beta.value(r);
        }
        fc->weights = Tensor::real(fc->weights.shape(), std::move(w));
        fc->bias = Tensor::real({C}, std::move(b));
        return out;
    }
    if (auto* cv = std::get_if<ir::Conv2D>(&out.op)) {
        if (cv->out_channels() != C)
            throw ShapeError("cannot fold batch norm with " + std::to_string(C) + " channels into '" + prev.name +
                             "' with " + std::to_string(cv->out_channels()) + " output channels");
        const auto a = bn_affine(bn);
        const std::size_t per = cv->kernel.numel() / C;
        std::vector<double> k(cv->kernel.numel()), b(C);
        for (std::size_t o = 0; o < C; ++o) {
            for (std::size_t i = 0; i < per; ++i) k[o * per + i] = cv->kernel.value(o * per + i) * a.scale[o];
            b[o] = (cv->bias.value(o) - bn.mean.value(o)) * a.scale[o] + bn.beta.value(o);
        }
        cv->kernel = Tensor::real(cv->kernel.shape(), std::move(k));
        cv->bias = Tensor::real({C}, std::move(b));
        return out;
    }
    throw InputError("batch norm can only fold into FullyConnected or Conv2D, not '" + prev.name + "'");
}

ir::Layer lower_batchnorm(const ir::BatchNorm& bn, const Shape& input, const std::string& name) {
    const auto a = bn_affine(bn);
    const std::size_t C = a.scale.size();
    if (input.empty() || input[0] != C) throw ShapeError("batch norm '" + name + "' does not match its input");
    if (input.size() == 3) {
        ir::Conv2D c;
        c.kernel = Tensor::real({C, 1, 1, 1}, a.scale);
        c.bias = Tensor::real({C}, a.shift);
        c.groups = C;
        return {name, std::move(c)};
    }
    if (input.size() != 1) throw ShapeError("batch norm '" + name + "' needs a [C] or [C,H,W] input");
    std::vector<double> w(C * C, 0.0);
    for (std::size_t i = 0; i < C; ++i) w[i * C + i] = a.scale[i];
    return {name, ir::FullyConnected{Tensor::real({C, C}, std::move(w)), Tensor::real({C}, a.shift)}};
}

FoldResult fold_batchnorms(const ir::NetworkModel& model) {
    const auto shapes = ir::layer_shapes(model);
    FoldResult r;
    r.model.name = model.name;
    r.model.input_shape = model.input_shape;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const auto& l = model.layers[i];
        const auto* bn = std::get_if<ir::BatchNorm>(&l.op);
        if (!bn) {
            r.model.layers.push_back(l);
            continue;
        }
        auto& out = r.model.layers;
        const bool foldable = !out.empty() && i > 0 && model.layers[i - 1].name == out.back().name &&
                              (std::holds_alternative<ir::FullyConnected>(out.back().op) ||
                               std::holds_alternative<ir::Conv2D>(out.back().op)) &&
                              !r.diagonal_fc.count(out.back().name);
        if (foldable) {
            out.back() = fold_batchnorm(*bn, out.back());
        } else {
            out.push_back(lower_batchnorm(*bn, shapes[i], l.name));
            if (shapes[i].size() == 1) r.diagonal_fc.insert(l.name);
        }
    }
    return r;
}

}  // namespace apu::mapper
