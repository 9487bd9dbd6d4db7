// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "apu/compress.hpp"
#include "apu/config.hpp"
#include "apu/mapper.hpp"
#include "apu/model.hpp"
#include "apu/rng.hpp"
#include "apu/simulator.hpp"

namespace apu::testing {

inline std::filesystem::path source_dir() { return APU_SOURCE_DIR; }

inline Tensor random_real(Shape shape, Rng& rng, double lim) {
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = rng.uniform(-lim, lim);
    return Tensor::real(std::move(shape), std::move(v));
}

inline ir::Layer fc_layer(const std::string& name, std::size_t out, std::size_t in, Rng& rng) {
    return {name, ir::FullyConnected{random_real({out, in}, rng, 1.0), random_real({out}, rng, 0.2)}};
}

inline ir::Layer bn_layer(const std::string& name, std::size_t c, Rng& rng) {
    ir::BatchNorm bn;
    std::vector<double> g(c), b(c), m(c), v(c);
    for (std::size_t i = 0; i < c; ++i) {
        g[i] = rng.uniform(0.5, 1.5);
        b[i] = rng.uniform(-0.2, 0.2);
        m[i] = rng.uniform(-0.2, 0.2);
        v[i] = rng.uniform(0.5, 2.0);
    }
    bn.gamma = Tensor::real({c}, g);
    bn.beta = Tensor::real({c}, b);
    bn.mean = Tensor::real({c}, m);
    bn.variance = Tensor::real({c}, v);
    return {name, std::move(bn)};
}

// A small random network of 1..4 layers drawn from FC, conv, pool, BN and
// ReLU, with every dimension at most 64.
inline ir::NetworkModel random_model(Rng& rng, std::size_t index) {
    ir::NetworkModel m;
    m.name = "random" + std::to_string(index);
    const std::size_t n = 1 + rng.below(4);
    const bool spatial = rng.below(2) == 1;
    auto pick = [&](std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); };
    std::size_t c = pick(1, 4), h = pick(3, 6), w = pick(3, 6), flat = pick(2, 64);
    m.input_shape = spatial ? Shape{c, h, w} : Shape{flat};
    bool is_spatial = spatial;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string name = "l" + std::to_string(i);
        const auto roll = rng.below(10);
        if (is_spatial && roll < 4) {
            ir::Conv2D cv;
            const std::size_t k = std::min<std::size_t>(pick(1, 3), std::min(h, w));
            std::size_t groups = 1;
            if (rng.below(3) == 0) groups = c;
            const std::size_t co = groups * pick(1, std::max<std::size_t>(1, 8 / groups));
            cv.groups = groups;
            cv.kernel = random_real({co, c / groups, k, k}, rng, 1.0);
            cv.bias = random_real({co}, rng, 0.2);
            cv.padding = {rng.below(2), rng.below(2)};
            cv.stride = {1 + rng.below(2), 1 + rng.below(2)};
            m.layers.push_back({name, cv});
            c = co;
            h = (h + 2 * cv.padding[0] - k) / cv.stride[0] + 1;
            w = (w + 2 * cv.padding[1] - k) / cv.stride[1] + 1;
        } else if (is_spatial && roll < 6 && h >= 2 && w >= 2) {
            ir::MaxPool2D p;
            p.window = {2, 2};
            p.stride = {1 + rng.below(2), 1 + rng.below(2)};
            m.layers.push_back({name, p});
            h = (h - 2) / p.stride[0] + 1;
            w = (w - 2) / p.stride[1] + 1;
        } else if (is_spatial ? roll == 6 : roll < 2) {
            m.layers.push_back(bn_layer(name, is_spatial ? c : flat, rng));
        } else if (is_spatial ? roll == 7 : roll < 4) {
            m.layers.push_back({name, ir::ReLU{}});
        } else {
            const std::size_t in = is_spatial ? c * h * w : flat;
            if (in > 64) {
                m.layers.push_back({name, ir::ReLU{}});
                continue;
            }
            flat = pick(1, 64);
            m.layers.push_back(fc_layer(name, flat, in, rng));
            is_spatial = false;
        }
    }
    ir::validate(m);
    return m;
}

inline AcceleratorConfig small_config(std::size_t pes, std::size_t dim, int wb, int ab) {
    AcceleratorConfig cfg;
    cfg.num_pes = pes;
    cfg.pe_rows = dim;
    cfg.pe_cols = dim;
    cfg.weight_bits = wb;
    cfg.activation_bits = ab;
    return cfg;
}

struct OracleRun {
    bool spatial_ok = false, temporal_ok = false;
    std::string detail;
};

// Compress, map and simulate one model in both PE modes and compare with the
// quantized reference evaluation of the same compressed model.
inline OracleRun oracle_check(const ir::NetworkModel& model, const prune::CompressOptions& co,
                              const AcceleratorConfig& cfg, const Tensor& input) {
    OracleRun r;
    const auto cm = prune::compress(model, co);
    const auto prog = mapper::map_model(cm, cfg);
    const Tensor ref = ir::reference_eval(prune::to_network_model(cm), input, &cm.quant);
    for (PeMode mode : {PeMode::Spatial, PeMode::Temporal}) {
        const auto rep = sim::simulate(prog, input, {mode, nullptr});
        const bool ok = rep.output && ref.is_int() && rep.output->is_int() && rep.output->shape() == ref.shape() &&
                        rep.output->ints().size() == ref.numel() &&
                        std::ranges::equal(rep.output->ints(), ref.ints());
        (mode == PeMode::Spatial ? r.spatial_ok : r.temporal_ok) = ok;
        if (!ok && r.detail.empty()) r.detail = model.name + " differs in " + to_string(mode) + " mode";
    }
    return r;
}

}  // namespace apu::testing
