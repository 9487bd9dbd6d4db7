// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <string>

#include "apu/bn_fold.hpp"
#include "apu/error.hpp"
#include "apu/json_io.hpp"
#include "apu/model.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace apu;
using apu::testing::random_real;

namespace {

ir::NetworkModel fc_model(std::size_t out, std::size_t in, std::vector<double> w, std::vector<double> b, bool relu) {
    ir::NetworkModel m;
    m.name = "t";
    m.input_shape = {in};
    m.layers.push_back({"fc", ir::FullyConnected{Tensor::real({out, in}, std::move(w)), Tensor::real({out}, std::move(b))}});
    if (relu) m.layers.push_back({"relu", ir::ReLU{}});
    return m;
}

// Scalar loop evaluation of a single convolution, written independently of the library.
std::vector<double> naive_conv(const ir::Conv2D& cv, const Tensor& x) {
    const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
    const std::size_t Co = cv.out_channels(), Cg = C / cv.groups, Cog = Co / cv.groups;
    const std::size_t KH = cv.kh(), KW = cv.kw();
    const std::size_t OH = (H + 2 * cv.padding[0] - KH) / cv.stride[0] + 1;
    const std::size_t OW = (W + 2 * cv.padding[1] - KW) / cv.stride[1] + 1;
    std::vector<double> out(Co * OH * OW, 0.0);
    for (std::size_t o = 0; o < Co; ++o)
        for (std::size_t oy = 0; oy < OH; ++oy)
            for (std::size_t ox = 0; ox < OW; ++ox) {
                double s = cv.bias.value(o);
                const std::size_t g = o / Cog;
                for (std::size_t ci = 0; ci < Cg; ++ci)
                    for (std::size_t ky = 0; ky < KH; ++ky)
                        for (std::size_t kx = 0; kx < KW; ++kx) {
                            const long iy = static_cast<long>(oy * cv.stride[0] + ky) - static_cast<long>(cv.padding[0]);
                            const long ix = static_cast<long>(ox * cv.stride[1] + kx) - static_cast<long>(cv.padding[1]);
                            if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W)) continue;
                            const std::size_t c = g * Cg + ci;
                            s += cv.kernel.value(((o * Cg + ci) * KH + ky) * KW + kx) *
                                 x.value((c * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix));
                        }
                out[(o * OH + oy) * OW + ox] = s;
            }
    return out;
}

}  // namespace

TEST_CASE("identity FC model parses with one layer") {
    const std::string text = R"({"name":"id","input_shape":[4],"layers":[{"name":"fc","type":"FullyConnected",
        "weights":{"shape":[4,4],"data":[1,0,0,0,0,1,0,0,0,0,1,0,0,0,0,1]},"bias":{"shape":[4],"data":[0,0,0,0]}}]})";
    const auto m = ir::parse_model(text);
    CHECK(m.layers.size() == 1);
    CHECK(m.input_shape == Shape{4});
}

TEST_CASE("shape mismatch names both layers") {
    const std::string text = R"({"input_shape":[4],"layers":[
        {"name":"first","type":"FullyConnected","weights":{"shape":[3,4],"fill":{"kind":"constant","value":1}}},
        {"name":"second","type":"FullyConnected","weights":{"shape":[2,5],"fill":{"kind":"constant","value":1}}}]})";
    try {
        ir::parse_model(text);
        FAIL("expected a shape error");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("first") != std::string::npos);
        CHECK(msg.find("second") != std::string::npos);
    }
}

TEST_CASE("malformed JSON reports a position") {
    try {
        ir::parse_model("{\n  \"layers\": [,]\n}");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
}

TEST_CASE("unknown layer types are rejected") {
    CHECK_THROWS_AS(ir::parse_model(R"({"input_shape":[2],"layers":[{"type":"Dropout"}]})"), InputError);
}

TEST_CASE("bundled lenet300 loads") {
    const auto m = ir::load_model(apu::testing::source_dir() / "models/lenet300.json");
    std::vector<std::size_t> widths;
    std::size_t relus = 0;
    for (const auto& l : m.layers) {
        if (const auto* fc = std::get_if<ir::FullyConnected>(&l.op)) widths.push_back(fc->weights.dim(0));
        if (std::holds_alternative<ir::ReLU>(l.op)) ++relus;
    }
    CHECK(widths == std::vector<std::size_t>{300, 100, 10});
    CHECK(relus == 2);
    CHECK(m.input_shape == Shape{784});
}

TEST_CASE("identity FC then ReLU") {
    std::vector<double> w(16, 0.0);
    for (int i = 0; i < 4; ++i) w[i * 5] = 1.0;
    const auto m = fc_model(4, 4, w, {0, 0, 0, 0}, true);
    const auto y = ir::reference_eval(m, Tensor::real({4}, {1, -2, 3, -4}));
    CHECK(std::vector<double>(y.reals().begin(), y.reals().end()) == std::vector<double>{1, 0, 3, 0});
}

TEST_CASE("2x2 FC by hand") {
    const auto m = fc_model(2, 2, {1, 2, 3, 4}, {1, 1}, false);
    const auto y = ir::reference_eval(m, Tensor::real({2}, {1, 1}));
    CHECK(y.value(0) == 4.0);
    CHECK(y.value(1) == 8.0);
}

TEST_CASE("2x2 max pool") {
    ir::NetworkModel m;
    m.input_shape = {1, 2, 2};
    m.layers.push_back({"pool", ir::MaxPool2D{}});
    const auto y = ir::reference_eval(m, Tensor::real({1, 2, 2}, {1, 2, 3, 4}));
    CHECK(y.shape() == Shape{1, 1, 1});
    CHECK(y.value(0) == 4.0);
}

TEST_CASE("convolution matches a scalar loop") {
    Rng rng(21);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t g = 1 + rng.below(3);
        const std::size_t C = g * (1 + rng.below(3)), Co = g * (1 + rng.below(3));
        const std::size_t k = 1 + rng.below(3), H = k + rng.below(4), W = k + rng.below(4);
        ir::Conv2D cv;
        cv.groups = g;
        cv.kernel = random_real({Co, C / g, k, k}, rng, 1.0);
        cv.bias = random_real({Co}, rng, 1.0);
        cv.stride = {1 + rng.below(2), 1 + rng.below(2)};
        cv.padding = {rng.below(2), rng.below(2)};
        ir::NetworkModel m;
        m.input_shape = {C, H, W};
        m.layers.push_back({"conv", cv});
        const auto x = random_real({C, H, W}, rng, 1.0);
        const auto y = ir::reference_eval(m, x);
        const auto want = naive_conv(cv, x);
        REQUIRE(y.numel() == want.size());
        for (std::size_t i = 0; i < want.size(); ++i) CHECK(std::abs(y.value(i) - want[i]) < 1e-9);
    }
}

TEST_CASE("reference evaluation is deterministic") {
    Rng rng(5);
    const auto m = apu::testing::random_model(rng, 0);
    const auto x = random_real(m.input_shape, rng, 1.0);
    CHECK(ir::reference_eval(m, x) == ir::reference_eval(m, x));
}

TEST_CASE("models round-trip through JSON") {
    Rng rng(8);
    const auto m = apu::testing::random_model(rng, 1);
    const auto back = ir::parse_model(ir::dump_model(m));
    const auto x = random_real(m.input_shape, rng, 1.0);
    CHECK(ir::reference_eval(m, x) == ir::reference_eval(back, x));
}

TEST_CASE("identity batch norm leaves a layer unchanged") {
    const auto m = fc_model(1, 1, {1.5}, {0.25}, false);
    ir::BatchNorm bn;
    bn.gamma = Tensor::real({1}, {1});
    bn.beta = Tensor::real({1}, {0});
    bn.mean = Tensor::real({1}, {0});
    bn.variance = Tensor::real({1}, {1});
    bn.epsilon = 0;
    const auto folded = mapper::fold_batchnorm(bn, m.layers[0]);
    const auto& fc = std::get<ir::FullyConnected>(folded.op);
    CHECK(fc.weights.value(0) == 1.5);
    CHECK(fc.bias.value(0) == 0.25);
}

TEST_CASE("batch norm folding by hand") {
    auto m = fc_model(1, 1, {1}, {0}, false);
    ir::BatchNorm bn;
    bn.gamma = Tensor::real({1}, {2});
    bn.beta = Tensor::real({1}, {1});
    bn.mean = Tensor::real({1}, {0});
    bn.variance = Tensor::real({1}, {1});
    bn.epsilon = 0;
    ir::NetworkModel folded = m;
    folded.layers[0] = mapper::fold_batchnorm(bn, m.layers[0]);
    CHECK(ir::reference_eval(folded, Tensor::real({1}, {3})).value(0) == doctest::Approx(7.0));
    m.layers.push_back({"bn", bn});
    CHECK(ir::reference_eval(m, Tensor::real({1}, {3})).value(0) == doctest::Approx(7.0));
}

TEST_CASE("folded batch norm matches the two-layer evaluation") {
    Rng rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        ir::NetworkModel m;
        const bool conv = trial % 2 == 1;
        if (conv) {
            m.input_shape = {2, 4, 4};
            ir::Conv2D cv;
            cv.kernel = random_real({3, 2, 3, 3}, rng, 1.0);
            cv.bias = random_real({3}, rng, 1.0);
            m.layers.push_back({"conv", cv});
            m.layers.push_back(apu::testing::bn_layer("bn", 3, rng));
        } else {
            m.input_shape = {5};
            m.layers.push_back(apu::testing::fc_layer("fc", 4, 5, rng));
            m.layers.push_back(apu::testing::bn_layer("bn", 4, rng));
        }
        const auto f = mapper::fold_batchnorms(m);
        CHECK(f.model.layers.size() == 1);
        const auto x = random_real(m.input_shape, rng, 2.0);
        const auto a = ir::reference_eval(m, x), b = ir::reference_eval(f.model, x);
        for (std::size_t i = 0; i < a.numel(); ++i) CHECK(std::abs(a.value(i) - b.value(i)) < 1e-9);
    }
}

TEST_CASE("standalone batch norm lowers to a 1x1 conv with one channel per group") {
    Rng rng(4);
    ir::NetworkModel m;
    m.input_shape = {3, 2, 2};
    m.layers.push_back(apu::testing::bn_layer("bn", 3, rng));
    const auto f = mapper::fold_batchnorms(m);
    REQUIRE(f.model.layers.size() == 1);
    const auto* cv = std::get_if<ir::Conv2D>(&f.model.layers[0].op);
    REQUIRE(cv);
    CHECK(cv->kh() == 1);
    CHECK(cv->kw() == 1);
    CHECK(cv->groups == 3);
    CHECK(cv->in_channels() / cv->groups == 1);
    const auto x = random_real(m.input_shape, rng, 1.0);
    const auto a = ir::reference_eval(m, x), b = ir::reference_eval(f.model, x);
    for (std::size_t i = 0; i < a.numel(); ++i) CHECK(std::abs(a.value(i) - b.value(i)) < 1e-9);
}
