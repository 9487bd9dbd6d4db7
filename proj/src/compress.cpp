// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#include "apu/compress.hpp"

#include <algorithm>
#include <cmath>

#include "apu/bn_fold.hpp"
#include "apu/error.hpp"
#include "apu/log.hpp"
#include "apu/rng.hpp"

namespace apu::prune {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

double scale_for(double max_abs, int bits) {
    const double qmax = static_cast<double>(act_qmax(bits));
    return max_abs > 0.0 ? max_abs / qmax : 1.0;
}

std::vector<double> values_of(std::initializer_list<const Tensor*> ts) {
    std::vector<double> v;
    for (const Tensor* t : ts)
        for (std::size_t i = 0; i < t->numel(); ++i) v.push_back(t->value(i));
    return v;
}

LayerQuant fit_weights(const std::vector<double>& w, const CompressOptions& o, const std::string& name) {
    if (o.scheme == QuantScheme::UniformSymmetric) {
        double peak = 0.0;
        for (double x : w) peak = std::max(peak, std::abs(x));
        return LayerQuant::uniform(o.weight_bits, scale_for(peak, o.weight_bits), 1.0);
    }
    return LayerQuant::nonuniform(fit_layer_codebook(w, o.weight_bits, derive_seed(o.seed, "codebook/" + name)), 1.0);
}

int code_bits(const LayerQuant& lq) {
    return lq.weights.bits + (lq.weights.scheme == QuantScheme::NonuniformCodebook ? 1 : 0);
}

Tensor encode(const Tensor& t, const LayerQuant& lq) {
    std::vector<std::int64_t> v(t.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = quantize_value(t.value(i), lq.weights).code;
    return Tensor::integer(t.shape(), std::move(v), code_bits(lq));
}

Tensor decode(const Tensor& codes, const LayerQuant& lq) {
    std::vector<std::int64_t> v(codes.numel());
    std::int64_t lo = 0, hi = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = lq.decode(codes.ints()[i]);
        lo = std::min(lo, v[i]);
        hi = std::max(hi, v[i]);
    }
    return Tensor::integer(codes.shape(), std::move(v), std::max(lq.operand_bits(), signed_bits_for(lo, hi)));
}

Tensor int_bias(const Tensor& b, double acc_scale) {
    std::vector<std::int64_t> v(b.numel());
    std::int64_t lo = 0, hi = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = bias_int(b.value(i), acc_scale);
        lo = std::min(lo, v[i]);
        hi = std::max(hi, v[i]);
    }
    return Tensor::integer(b.shape(), std::move(v), std::max(2, signed_bits_for(lo, hi)));
}

}  // namespace

std::string CompressedLayer::kind() const {
    return std::visit(overloaded{[](const FcStage&) { return "fc"; }, [](const ConvStage&) { return "conv"; },
                                 [](const PoolStage&) { return "pool"; }, [](const ReluStage&) { return "relu"; },
                                 [](const AttentionStage&) { return "attention"; }},
                      op);
}

CompressedModel compress(const ir::NetworkModel& model, const CompressOptions& o) {
    ir::validate(model);
    auto folded = mapper::fold_batchnorms(model);
    ir::NetworkModel& prep = folded.model;
    const auto shapes = ir::layer_shapes(prep);

    // Structured pruning of every FC layer.
    std::map<std::string, BlockMask> masks;
    for (auto& l : prep.layers) {
        auto* fc = std::get_if<ir::FullyConnected>(&l.op);
        if (!fc) continue;
        const std::size_t R = fc->weights.dim(0), C = fc->weights.dim(1);
        BlockMask mask;
        if (auto it = o.masks.find(l.name); it != o.masks.end()) {
            mask = it->second;
        } else if (folded.diagonal_fc.count(l.name)) {
            mask = BlockMask::identity(R, C, R);
        } else {
            std::size_t nb = o.num_blocks;
            if (auto it2 = o.layer_blocks.find(l.name); it2 != o.layer_blocks.end()) nb = it2->second;
            if (nb > std::min(R, C)) {
                log::info("layer '", l.name, "': clamping ", nb, " blocks to ", std::min(R, C));
                nb = std::min(R, C);
            }
            mask = generate_mask(R, C, nb, derive_seed(o.seed, "mask/" + l.name));
        }
        fc->weights = apply_mask(fc->weights, mask);
        masks.emplace(l.name, std::move(mask));
    }

    // Calibration: activation ranges from real-mode runs on sample inputs.
    std::vector<Tensor> calib = o.calibration_inputs;
    if (calib.empty()) {
        Rng rng(derive_seed(o.seed, "calibration"));
        for (std::size_t i = 0; i < std::max<std::size_t>(1, o.calibration_samples); ++i) {
            std::vector<double> v(shape_numel(prep.input_shape));
            for (auto& x : v) x = rng.uniform(-1.0, 1.0);
            calib.push_back(Tensor::real(prep.input_shape, std::move(v)));
        }
    }
    std::map<std::string, double> peak;
    for (const auto& x : calib)
        ir::reference_eval(prep, x, nullptr, [&](const std::string& key, double m) {
            auto& p = peak[key];
            p = std::max(p, m);
        });

    CompressedModel out;
    out.name = model.name;
    out.input_shape = prep.input_shape;
    out.quant.weight_bits = o.weight_bits;
    out.quant.activation_bits = o.activation_bits;
    out.quant.scheme = o.scheme;
    out.quant.input_scale = scale_for(peak["input"], o.activation_bits);
    out.quant.validate();
    const int ab = o.activation_bits;

    double s = out.quant.input_scale;
    for (std::size_t i = 0; i < prep.layers.size(); ++i) {
        const auto& l = prep.layers[i];
        const bool relu_next = i + 1 < prep.layers.size() && std::holds_alternative<ir::ReLU>(prep.layers[i + 1].op);
        CompressedLayer cl;
        cl.name = l.name;
        cl.input_shape = shapes[i];
        cl.output_shape = shapes[i + 1];
        bool fused = false;
        std::visit(overloaded{
                       [&](const ir::FullyConnected& fc) {
                           LayerQuant lq = fit_weights(values_of({&fc.weights}), o, l.name);
                           lq.output_scale = scale_for(peak[l.name], ab);
                           const Tensor b = int_bias(fc.bias, lq.weight_scale * s);
                           FcStage st{pack_blocks(fc.weights, masks.at(l.name), &lq.weights, &b), relu_next};
                           cl.op = std::move(st);
                           s = lq.output_scale;
                           out.quant.layers.emplace(l.name, std::move(lq));
                           fused = relu_next;
                       },
                       [&](const ir::Conv2D& c) {
                           LayerQuant lq = fit_weights(values_of({&c.kernel}), o, l.name);
                           lq.output_scale = scale_for(peak[l.name], ab);
                           ConvStage st{c, relu_next};
                           st.conv.kernel = encode(c.kernel, lq);
                           st.conv.bias = int_bias(c.bias, lq.weight_scale * s);
                           cl.op = std::move(st);
                           s = lq.output_scale;
                           out.quant.layers.emplace(l.name, std::move(lq));
                           fused = relu_next;
                       },
                       [&](const ir::MaxPool2D& p) { cl.op = PoolStage{p}; },
                       [&](const ir::ReLU&) { cl.op = ReluStage{}; },
                       [&](const ir::MultiHeadAttention& m) {
                           LayerQuant lq = fit_weights(values_of({&m.w_q, &m.w_k, &m.w_v, &m.w_o}), o, l.name);
                           lq.output_scale = scale_for(peak[l.name], ab);
                           lq.q_scale = scale_for(peak[l.name + "/q"], ab);
                           lq.k_scale = scale_for(peak[l.name + "/k"], ab);
                           lq.v_scale = scale_for(peak[l.name + "/v"], ab);
                           lq.head_scale = scale_for(peak[l.name + "/head"], ab);
                           AttentionStage st{m};
                           st.mha.w_q = encode(m.w_q, lq);
                           st.mha.w_k = encode(m.w_k, lq);
                           st.mha.w_v = encode(m.w_v, lq);
                           st.mha.w_o = encode(m.w_o, lq);
                           cl.op = std::move(st);
                           s = lq.output_scale;
                           out.quant.layers.emplace(l.name, std::move(lq));
                       },
                       [&](const ir::BatchNorm&) { throw InternalError("batch norm survived folding"); }},
                   l.op);
        if (fused) {
            cl.output_shape = shapes[i + 2];
            ++i;
        }
        out.layers.push_back(std::move(cl));
    }
    return out;
}

ir::NetworkModel to_network_model(const CompressedModel& c) {
    if (c.shape_only) throw InputError("model '" + c.name + "' is shape-only and has no weights");
    ir::NetworkModel m;
    m.name = c.name;
    m.input_shape = c.input_shape;
    for (const auto& l : c.layers) {
        bool relu = false;
        std::visit(overloaded{[&](const FcStage& st) {
                                  const LayerQuant& lq = c.quant.layer(l.name);
                                  auto [w, b] = unpack_blocks(st.layer);
                                  m.layers.push_back({l.name, ir::FullyConnected{decode(w, lq), b}});
                                  relu = st.relu;
                              },
                              [&](const ConvStage& st) {
                                  const LayerQuant& lq = c.quant.layer(l.name);
                                  ir::Conv2D cv = st.conv;
                                  cv.kernel = decode(st.conv.kernel, lq);
                                  m.layers.push_back({l.name, std::move(cv)});
                                  relu = st.relu;
                              },
                              [&](const PoolStage& st) { m.layers.push_back({l.name, st.pool}); },
                              [&](const ReluStage&) { m.layers.push_back({l.name, ir::ReLU{}}); },
                              [&](const AttentionStage& st) {
                                  const LayerQuant& lq = c.quant.layer(l.name);
                                  ir::MultiHeadAttention a = st.mha;
                                  a.w_q = decode(a.w_q, lq);
                                  a.w_k = decode(a.w_k, lq);
                                  a.w_v = decode(a.w_v, lq);
                                  a.w_o = decode(a.w_o, lq);
                                  m.layers.push_back({l.name, std::move(a)});
                              }},
                   l.op);
        if (relu) m.layers.push_back({l.name + "/relu", ir::ReLU{}});
    }
    ir::validate(m);
    return m;
}

}  // namespace apu::prune
