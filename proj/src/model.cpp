// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#include "apu/model.hpp"

#include <set>

#include "apu/digest.hpp"
#include "apu/error.hpp"
#include "apu/json_io.hpp"

namespace apu::ir {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

void expect_shape(const Tensor& t, const Shape& s, const std::string& what) {
    if (t.shape() != s) throw ShapeError(what + " has shape " + shape_str(t.shape()) + ", expected " + shape_str(s));
}

std::size_t window_out(std::size_t in, std::size_t pad, std::size_t k, std::size_t stride, const std::string& what) {
    if (stride == 0) throw ShapeError(what + ": stride must be positive");
    if (k == 0) throw ShapeError(what + ": window must be positive");
    if (in + 2 * pad < k)
        throw ShapeError(what + ": window " + std::to_string(k) + " larger than padded input " + std::to_string(in + 2 * pad));
    return (in + 2 * pad - k) / stride + 1;
}

}  // namespace

std::string Layer::type_name() const {
    return std::visit(overloaded{[](const FullyConnected&) { return "FullyConnected"; },
                                 [](const Conv2D&) { return "Conv2D"; },
                                 [](const MaxPool2D&) { return "MaxPool2D"; },
                                 [](const BatchNorm&) { return "BatchNorm"; },
                                 [](const MultiHeadAttention&) { return "MultiHeadAttention"; },
                                 [](const ReLU&) { return "ReLU"; }},
                      op);
}

Shape output_shape(const Layer& layer, const Shape& in) {
    const std::string who = "layer '" + layer.name + "' (" + layer.type_name() + ")";
    return std::visit(
        overloaded{
            [&](const FullyConnected& fc) -> Shape {
                if (fc.weights.rank() != 2) throw ShapeError(who + ": weights must be rank 2");
                expect_shape(fc.bias, {fc.weights.dim(0)}, who + " bias");
                if (shape_numel(in) != fc.weights.dim(1))
                    throw ShapeError(who + " expects " + std::to_string(fc.weights.dim(1)) + " inputs, got " +
                                     std::to_string(shape_numel(in)) + " from shape " + shape_str(in));
                return {fc.weights.dim(0)};
            },
            [&](const Conv2D& c) -> Shape {
                if (c.kernel.rank() != 4) throw ShapeError(who + ": kernel must be rank 4");
                if (c.groups == 0) throw ShapeError(who + ": groups must be >= 1");
                if (c.out_channels() % c.groups)
                    throw ShapeError(who + ": C_out " + std::to_string(c.out_channels()) + " not divisible by groups " +
                                     std::to_string(c.groups));
                expect_shape(c.bias, {c.out_channels()}, who + " bias");
                if (in.size() != 3) throw ShapeError(who + " expects a [C,H,W] input, got " + shape_str(in));
                if (in[0] != c.in_channels())
                    throw ShapeError(who + " expects " + std::to_string(c.in_channels()) + " input channels, got " +
                                     std::to_string(in[0]));
                return {c.out_channels(), window_out(in[1], c.padding[0], c.kh(), c.stride[0], who),
                        window_out(in[2], c.padding[1], c.kw(), c.stride[1], who)};
            },
            [&](const MaxPool2D& p) -> Shape {
                if (in.size() != 3) throw ShapeError(who + " expects a [C,H,W] input, got " + shape_str(in));
                if (p.padding[0] >= p.window[0] || p.padding[1] >= p.window[1])
                    throw ShapeError(who + ": padding must be smaller than the window");
                return {in[0], window_out(in[1], p.padding[0], p.window[0], p.stride[0], who),
                        window_out(in[2], p.padding[1], p.window[1], p.stride[1], who)};
            },
            [&](const BatchNorm& bn) -> Shape {
                if (in.size() != 1 && in.size() != 3)
                    throw ShapeError(who + " expects a [C] or [C,H,W] input, got " + shape_str(in));
                const Shape cs{in[0]};
                expect_shape(bn.gamma, cs, who + " gamma");
                expect_shape(bn.beta, cs, who + " beta");
                expect_shape(bn.mean, cs, who + " mean");
                expect_shape(bn.variance, cs, who + " variance");
                return in;
            },
            [&](const MultiHeadAttention& m) -> Shape {
                if (m.heads == 0 || m.d_model == 0 || m.d_k == 0) throw ShapeError(who + ": heads, d_model, d_k must be positive");
                const Shape proj{m.heads, m.d_k, m.d_model};
                expect_shape(m.w_q, proj, who + " w_q");
                expect_shape(m.w_k, proj, who + " w_k");
                expect_shape(m.w_v, proj, who + " w_v");
                expect_shape(m.w_o, {m.heads, m.d_model, m.d_k}, who + " w_o");
                if (in.size() != 2 || in[1] != m.d_model)
                    throw ShapeError(who + " expects a [seq," + std::to_string(m.d_model) + "] input, got " + shape_str(in));
                return in;
            },
            [&](const ReLU&) -> Shape { return in; }},
        layer.op);
}

std::vector<Shape> layer_shapes(const NetworkModel& model) {
    std::vector<Shape> shapes{model.input_shape};
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        try {
            shapes.push_back(output_shape(model.layers[i], shapes.back()));
        } catch (const ShapeError& e) {
            if (i == 0) throw ShapeError(std::string("model input ") + shape_str(model.input_shape) + " vs " + e.what());
            throw ShapeError("shape mismatch between layer '" + model.layers[i - 1].name + "' (output " +
                             shape_str(shapes.back()) + ") and layer '" + model.layers[i].name + "': " + e.what());
        }
    }
    return shapes;
}

void validate(const NetworkModel& model) {
    if (model.input_shape.empty() || shape_numel(model.input_shape) == 0)
        throw ShapeError("model '" + model.name + "' has an empty input shape");
    std::set<std::string> names;
    for (const auto& l : model.layers)
        if (!names.insert(l.name).second) throw InputError("duplicate layer name '" + l.name + "'");
    layer_shapes(model);
    for (const auto& l : model.layers) {
        if (const auto* c = std::get_if<Conv2D>(&l.op)) {
            if (c->in_channels() % c->groups) throw ShapeError("layer '" + l.name + "': C_in not divisible by groups");
        }
        if (const auto* bn = std::get_if<BatchNorm>(&l.op)) {
            if (bn->variance.has_data())
                for (std::size_t i = 0; i < bn->variance.numel(); ++i)
                    if (!(bn->variance.value(i) + bn->epsilon > 0.0))
                        throw InputError("layer '" + l.name + "': variance + epsilon must be > 0 (channel " +
                                         std::to_string(i) + ")");
        }
    }
}

namespace {

Pair pair_from(const json& j, const char* key, Pair dflt) {
    if (!j.contains(key)) return dflt;
    const auto& v = j.at(key);
    if (v.is_number()) return {v.get<std::size_t>(), v.get<std::size_t>()};
    auto a = v.get<std::vector<std::size_t>>();
    if (a.size() != 2) throw InputError(std::string("'") + key + "' must be a number or a pair");
    return {a[0], a[1]};
}

Tensor bias_or_zeros(const json& j, std::size_t n, const std::string& what) {
    if (j.contains("bias")) return tensor_from_json(j.at("bias"), what + ".bias");
    return Tensor::real_zeros({n});
}

Layer layer_from_json(const json& j, std::size_t index) {
    const std::string where = "layers[" + std::to_string(index) + "]";
    if (!j.is_object() || !j.contains("type")) throw InputError(where + ": missing 'type'");
    const std::string type = j.at("type").get<std::string>();
    Layer l;
    l.name = j.value("name", "layer" + std::to_string(index));
    const std::string what = where + " '" + l.name + "'";
    if (type == "FullyConnected") {
        FullyConnected fc;
        fc.weights = tensor_from_json(j.at("weights"), what + ".weights");
        fc.bias = bias_or_zeros(j, fc.weights.rank() ? fc.weights.dim(0) : 0, what);
        l.op = std::move(fc);
    } else if (type == "Conv2D") {
        Conv2D c;
        c.kernel = tensor_from_json(j.at("kernel"), what + ".kernel");
        c.bias = bias_or_zeros(j, c.kernel.rank() ? c.kernel.dim(0) : 0, what);
        c.stride = pair_from(j, "stride", {1, 1});
        c.padding = pair_from(j, "padding", {0, 0});
        c.groups = j.value("groups", std::size_t{1});
        l.op = std::move(c);
    } else if (type == "MaxPool2D") {
        MaxPool2D p;
        p.window = pair_from(j, "window", {2, 2});
        p.stride = pair_from(j, "stride", p.window);
        p.padding = pair_from(j, "padding", {0, 0});
        l.op = p;
    } else if (type == "BatchNorm") {
        BatchNorm bn;
        bn.gamma = tensor_from_json(j.at("gamma"), what + ".gamma");
        bn.beta = tensor_from_json(j.at("beta"), what + ".beta");
        bn.mean = tensor_from_json(j.at("mean"), what + ".mean");
        bn.variance = tensor_from_json(j.at("variance"), what + ".variance");
        bn.epsilon = j.value("epsilon", 1e-5);
        l.op = std::move(bn);
    } else if (type == "MultiHeadAttention") {
        MultiHeadAttention m;
        m.heads = j.at("heads").get<std::size_t>();
        m.d_model = j.at("d_model").get<std::size_t>();
        m.d_k = j.at("d_k").get<std::size_t>();
        m.w_q = tensor_from_json(j.at("w_q"), what + ".w_q");
        m.w_k = tensor_from_json(j.at("w_k"), what + ".w_k");
        m.w_v = tensor_from_json(j.at("w_v"), what + ".w_v");
        m.w_o = tensor_from_json(j.at("w_o"), what + ".w_o");
        l.op = std::move(m);
    } else if (type == "ReLU") {
        l.op = ReLU{};
    } else {
        throw InputError(where + ": unknown layer type '" + type +
                         "' (supported: FullyConnected, Conv2D, MaxPool2D, BatchNorm, MultiHeadAttention, ReLU)");
    }
    return l;
}

json layer_to_json(const Layer& l) {
    json j;
    j["type"] = l.type_name();
    j["name"] = l.name;
    std::visit(overloaded{[&](const FullyConnected& fc) {
                              j["weights"] = tensor_to_json(fc.weights);
                              j["bias"] = tensor_to_json(fc.bias);
                          },
                          [&](const Conv2D& c) {
                              j["kernel"] = tensor_to_json(c.kernel);
                              j["bias"] = tensor_to_json(c.bias);
                              j["stride"] = c.stride;
                              j["padding"] = c.padding;
                              j["groups"] = c.groups;
                          },
                          [&](const MaxPool2D& p) {
                              j["window"] = p.window;
                              j["stride"] = p.stride;
                              j["padding"] = p.padding;
                          },
                          [&](const BatchNorm& bn) {
                              j["gamma"] = tensor_to_json(bn.gamma);
                              j["beta"] = tensor_to_json(bn.beta);
                              j["mean"] = tensor_to_json(bn.mean);
                              j["variance"] = tensor_to_json(bn.variance);
                              j["epsilon"] = bn.epsilon;
                          },
                          [&](const MultiHeadAttention& m) {
                              j["heads"] = m.heads;
                              j["d_model"] = m.d_model;
                              j["d_k"] = m.d_k;
                              j["w_q"] = tensor_to_json(m.w_q);
                              j["w_k"] = tensor_to_json(m.w_k);
                              j["w_v"] = tensor_to_json(m.w_v);
                              j["w_o"] = tensor_to_json(m.w_o);
                          },
                          [](const ReLU&) {}},
               l.op);
    return j;
}

}  // namespace

NetworkModel parse_model(const std::string& text, const std::string& origin) {
    json j = parse_json(text, origin);
    NetworkModel m;
    try {
        if (!j.is_object()) throw InputError("model must be a JSON object");
        m.name = j.value("name", std::string("model"));
        m.input_shape = j.at("input_shape").get<Shape>();
        const auto& layers = j.at("layers");
        if (!layers.is_array()) throw InputError("'layers' must be an array");
        for (std::size_t i = 0; i < layers.size(); ++i) m.layers.push_back(layer_from_json(layers[i], i));
    } catch (const json::exception& e) {
        throw InputError(std::string("model: ") + e.what());
    }
    validate(m);
    return m;
}

NetworkModel load_model(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw InputError("model file not found: '" + path.string() + "'");
    return parse_model(read_file(path), path.string());
}

std::string dump_model(const NetworkModel& model) {
    json j;
    j["name"] = model.name;
    j["input_shape"] = model.input_shape;
    j["layers"] = json::array();
    for (const auto& l : model.layers) j["layers"].push_back(layer_to_json(l));
    return dump_json(j);
}

}  // namespace apu::ir
