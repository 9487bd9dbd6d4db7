// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#include "apu/json_io.hpp"

#include <cmath>

#include "apu/digest.hpp"
#include "apu/error.hpp"
#include "apu/rng.hpp"

namespace apu {

json parse_json(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1, col = 1;
        const std::size_t end = std::min<std::size_t>(e.byte ? e.byte - 1 : 0, text.size());
        for (std::size_t i = 0; i < end; ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        std::string msg = e.what();
        auto pos = msg.find("syntax error");
        throw ParseError(origin + ": " + (pos == std::string::npos ? msg : msg.substr(pos)), line, col);
    }
}

json load_json(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw InputError("file not found: '" + path.string() + "'");
    return parse_json(read_file(path), path.string());
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

std::string dtype_name(const Tensor& t) {
    return t.is_int() ? "int" + std::to_string(t.bits()) : "real";
}

Tensor tensor_from_json(const json& j, const std::string& what, bool allow_shape_only) {
    try {
        if (!j.is_object() || !j.contains("shape")) throw InputError(what + ": tensor needs a 'shape'");
        Shape shape = j.at("shape").get<Shape>();
        std::string dtype = j.value("dtype", std::string("real"));
        int bits = 64;
        bool is_int = false;
        if (dtype != "real") {
            if (dtype.rfind("int", 0) != 0) throw InputError(what + ": unknown dtype '" + dtype + "'");
            is_int = true;
            bits = std::stoi(dtype.substr(3));
        }
        const std::size_t n = shape_numel(shape);
        if (j.contains("data")) {
            const auto& d = j.at("data");
            if (!d.is_array() || d.size() != n)
                throw ShapeError(what + ": shape " + shape_str(shape) + " needs " + std::to_string(n) + " elements, got " +
                                 std::to_string(d.is_array() ? d.size() : 0));
            if (is_int) {
                std::vector<std::int64_t> v;
                v.reserve(n);
                for (const auto& e : d) v.push_back(e.get<std::int64_t>());
                return Tensor::integer(std::move(shape), std::move(v), bits);
            }
            std::vector<double> v;
            v.reserve(n);
            for (const auto& e : d) v.push_back(e.get<double>());
            return Tensor::real(std::move(shape), std::move(v));
        }
        if (j.contains("fill")) {
            if (is_int) throw InputError(what + ": 'fill' is only supported for real tensors");
            const auto& f = j.at("fill");
            const std::string kind = f.value("kind", std::string("uniform"));
            std::vector<double> v(n);
            if (kind == "constant") {
                std::fill(v.begin(), v.end(), f.value("value", 0.0));
            } else if (kind == "uniform" || kind == "normal") {
                Rng rng(f.value("seed", std::uint64_t{0}));
                if (kind == "uniform") {
                    const double lo = f.value("low", -1.0), hi = f.value("high", 1.0);
                    for (auto& x : v) x = rng.uniform(lo, hi);
                } else {
                    const double mu = f.value("mean", 0.0), sd = f.value("std", 1.0);
                    for (auto& x : v) x = mu + sd * rng.normal();
                }
            } else {
                throw InputError(what + ": unknown fill kind '" + kind + "'");
            }
            return Tensor::real(std::move(shape), std::move(v));
        }
        if (!allow_shape_only) throw InputError(what + ": tensor has neither 'data' nor 'fill'");
        return Tensor::shape_only(std::move(shape), is_int ? DType::Int : DType::Real, bits);
    } catch (const json::exception& e) {
        throw InputError(what + ": " + e.what());
    }
}

json tensor_to_json(const Tensor& t) {
    json j;
    j["shape"] = t.shape();
    j["dtype"] = dtype_name(t);
    if (t.has_data()) {
        if (t.is_int()) {
            auto v = t.ints();
            j["data"] = std::vector<std::int64_t>(v.begin(), v.end());
        } else {
            auto v = t.reals();
            j["data"] = std::vector<double>(v.begin(), v.end());
        }
    }
    return j;
}

json quantizer_to_json(const Quantizer& q) {
    json j;
    j["bits"] = q.bits;
    j["scheme"] = to_string(q.scheme);
    if (q.scheme == QuantScheme::UniformSymmetric)
        j["scale"] = q.scale;
    else
        j["codebook"] = q.codebook;
    return j;
}

Quantizer quantizer_from_json(const json& j) {
    if (parse_quant_scheme(j.at("scheme").get<std::string>()) == QuantScheme::UniformSymmetric)
        return Quantizer::uniform(j.at("bits").get<int>(), j.at("scale").get<double>());
    return Quantizer::from_codebook(j.at("codebook").get<std::vector<double>>());
}

json quant_spec_to_json(const QuantSpec& q) {
    json j;
    j["weight_bits"] = q.weight_bits;
    j["activation_bits"] = q.activation_bits;
    j["scheme"] = to_string(q.scheme);
    j["input_scale"] = q.input_scale;
    json layers = json::object();
    for (const auto& [name, lq] : q.layers) {
        json l;
        l["weights"] = quantizer_to_json(lq.weights);
        l["weight_scale"] = lq.weight_scale;
        if (!lq.decode_table.empty()) l["decode_table"] = lq.decode_table;
        l["output_scale"] = lq.output_scale;
        l["attention"] = {{"q", lq.q_scale}, {"k", lq.k_scale}, {"v", lq.v_scale}, {"head", lq.head_scale}};
        layers[name] = l;
    }
    j["layers"] = layers;
    return j;
}

QuantSpec quant_spec_from_json(const json& j) {
    try {
        QuantSpec q;
        q.weight_bits = j.at("weight_bits").get<int>();
        q.activation_bits = j.at("activation_bits").get<int>();
        q.scheme = parse_quant_scheme(j.at("scheme").get<std::string>());
        q.input_scale = j.at("input_scale").get<double>();
        for (const auto& [name, l] : j.at("layers").items()) {
            LayerQuant lq;
            lq.weights = quantizer_from_json(l.at("weights"));
            lq.weight_scale = l.at("weight_scale").get<double>();
            if (l.contains("decode_table")) lq.decode_table = l.at("decode_table").get<std::vector<std::int64_t>>();
            lq.output_scale = l.at("output_scale").get<double>();
            if (l.contains("attention")) {
                const auto& a = l.at("attention");
                lq.q_scale = a.at("q").get<double>();
                lq.k_scale = a.at("k").get<double>();
                lq.v_scale = a.at("v").get<double>();
                lq.head_scale = a.at("head").get<double>();
            }
            q.layers.emplace(name, std::move(lq));
        }
        q.validate();
        return q;
    } catch (const json::exception& e) {
        throw InputError(std::string("quantization spec: ") + e.what());
    }
}

}  // namespace apu
