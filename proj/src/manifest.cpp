// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#include "apu/manifest.hpp"

#include <algorithm>
#include <cctype>

#include "apu/error.hpp"
#include "apu/pruner.hpp"
#include "apu/rng.hpp"

namespace apu {

namespace {

ir::Pair pair_of(const json& j, const char* key, ir::Pair dflt) {
    if (!j.contains(key)) return dflt;
    const auto& v = j.at(key);
    if (v.is_number()) return {v.get<std::size_t>(), v.get<std::size_t>()};
    const auto a = v.get<std::vector<std::size_t>>();
    if (a.size() != 2) throw InputError(std::string("'") + key + "' must be a number or a pair");
    return {a[0], a[1]};
}

}  // namespace

bool is_layer_manifest(const json& j) { return j.is_object() && j.value("kind", "") == "layer-manifest"; }

prune::CompressedModel manifest_from_json(const json& j, const AcceleratorConfig& cfg, std::uint64_t seed,
                                          const std::string& origin) {
    if (!is_layer_manifest(j)) throw InputError(origin + ": not a layer manifest (expected \"kind\": \"layer-manifest\")");
    prune::CompressedModel m;
    m.name = j.value("name", "manifest");
    m.shape_only = true;
    m.independent_layers = true;
    m.quant.weight_bits = cfg.weight_bits;
    m.quant.activation_bits = cfg.activation_bits;
    const int wb = cfg.weight_bits;
    if (!j.contains("layers") || !j.at("layers").is_array() || j.at("layers").empty())
        throw InputError(origin + ": 'layers' must be a non-empty array");

    std::size_t idx = 0;
    for (const auto& lj : j.at("layers")) {
        const std::string where = origin + ": layers[" + std::to_string(idx) + "]";
        try {
            std::string type = lj.at("type").get<std::string>();
            std::transform(type.begin(), type.end(), type.begin(), [](unsigned char ch) { return std::tolower(ch); });
            if (type == "fullyconnected") type = "fc";
            if (type == "multiheadattention") type = "attention";
            prune::CompressedLayer cl;
            cl.name = lj.value("name", "layer" + std::to_string(idx));
            if (type == "fc") {
                const auto in = lj.at("in").get<std::size_t>(), out = lj.at("out").get<std::size_t>();
                const auto nb = lj.value("blocks", std::size_t{1});
                const auto mask = prune::generate_mask(out, in, nb, derive_seed(seed, "mask/" + cl.name));
                cl.input_shape = {in};
                cl.output_shape = {out};
                cl.op = prune::FcStage{prune::pack_shape_only(mask, wb), lj.value("relu", false)};
            } else if (type == "conv2d") {
                cl.input_shape = lj.at("input_shape").get<Shape>();
                if (cl.input_shape.size() != 3) throw ShapeError("conv input_shape must be [C, H, W]");
                ir::Conv2D c;
                const auto k = pair_of(lj, "kernel", {1, 1});
                c.groups = lj.value("groups", std::size_t{1});
                const std::size_t co = lj.at("out_channels").get<std::size_t>();
                if (c.groups == 0 || cl.input_shape[0] % c.groups || co % c.groups)
                    throw ShapeError("channels not divisible by groups " + std::to_string(c.groups));
                c.kernel = Tensor::shape_only({co, cl.input_shape[0] / c.groups, k[0], k[1]}, DType::Int, wb);
                c.bias = Tensor::shape_only({co}, DType::Int, 32);
                c.stride = pair_of(lj, "stride", {1, 1});
                c.padding = pair_of(lj, "padding", {0, 0});
                cl.output_shape = ir::output_shape(ir::Layer{cl.name, c}, cl.input_shape);
                cl.op = prune::ConvStage{c, lj.value("relu", true)};
            } else if (type == "maxpool2d") {
                cl.input_shape = lj.at("input_shape").get<Shape>();
                ir::MaxPool2D p;
                p.window = pair_of(lj, "window", {2, 2});
                p.stride = pair_of(lj, "stride", p.window);
                p.padding = pair_of(lj, "padding", {0, 0});
                cl.output_shape = ir::output_shape(ir::Layer{cl.name, p}, cl.input_shape);
                cl.op = prune::PoolStage{p};
            } else if (type == "relu") {
                cl.input_shape = lj.at("input_shape").get<Shape>();
                cl.output_shape = cl.input_shape;
                cl.op = prune::ReluStage{};
            } else if (type == "attention") {
                cl.input_shape = lj.at("input_shape").get<Shape>();
                if (cl.input_shape.size() != 2) throw ShapeError("attention input_shape must be [seq, d_model]");
                ir::MultiHeadAttention a;
                a.heads = lj.at("heads").get<std::size_t>();
                a.d_model = cl.input_shape[1];
                a.d_k = lj.value("d_k", a.d_model / std::max<std::size_t>(a.heads, 1));
                a.w_q = Tensor::shape_only({a.heads, a.d_k, a.d_model}, DType::Int, wb);
                a.w_k = a.w_q;
                a.w_v = a.w_q;
                a.w_o = Tensor::shape_only({a.heads, a.d_model, a.d_k}, DType::Int, wb);
                cl.output_shape = cl.input_shape;
                cl.op = prune::AttentionStage{a};
            } else {
                throw InputError("unknown layer type '" + type + "' (supported: FullyConnected, Conv2D, MaxPool2D, ReLU, MultiHeadAttention)");
            }
            if (idx == 0) m.input_shape = cl.input_shape;
            m.layers.push_back(std::move(cl));
        } catch (const json::exception& e) {
            throw InputError(where + ": " + e.what());
        } catch (const ShapeError& e) {
            throw ShapeError(where + ": " + e.what());
        }
        ++idx;
    }
    return m;
}

prune::CompressedModel load_manifest(const std::filesystem::path& path, const AcceleratorConfig& cfg, std::uint64_t seed) {
    if (!std::filesystem::exists(path)) throw InputError("manifest not found: '" + path.string() + "'");
    return manifest_from_json(load_json(path), cfg, seed, path.string());
}

}  // namespace apu
