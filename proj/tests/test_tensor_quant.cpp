// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "apu/error.hpp"
#include "apu/quant.hpp"
#include "apu/rng.hpp"
#include "apu/tensor.hpp"
#include "doctest.h"

using namespace apu;

TEST_CASE("integer tensors reject values outside their width") {
    CHECK_NOTHROW(Tensor::integer({2}, {-8, 7}, 4));
    CHECK_THROWS_AS(Tensor::integer({2}, {-9, 0}, 4), Error);
    CHECK_THROWS_AS(Tensor::integer({3}, {0, 1}, 8), Error);
}

TEST_CASE("shape-only tensors carry no data") {
    const auto t = Tensor::shape_only({4, 5});
    CHECK(t.numel() == 20);
    CHECK_FALSE(t.has_data());
}

TEST_CASE("signed width helpers") {
    CHECK(fits_signed(7, 4));
    CHECK_FALSE(fits_signed(8, 4));
    CHECK(fits_signed(-8, 4));
    CHECK(signed_bits_for(-8, 7) == 4);
    CHECK(signed_bits_for(0, 25600) == 16);
}

TEST_CASE("zero always quantizes to code zero") {
    for (int bits : {2, 4, 8, 16})
        for (double scale : {0.01, 0.5, 3.0}) CHECK(quantize_value(0.0, Quantizer::uniform(bits, scale)).code == 0);
    CHECK(quantize_value(0.0, Quantizer::from_codebook({-1.0, 0.0, 0.5, 1.0})).code == 0);
    CHECK(quantize_value(0.0, Quantizer::from_codebook({-1.0, -0.5, 0.25, 1.0})).code == 0);
}

TEST_CASE("uniform quantization saturates") {
    const auto q = Quantizer::uniform(4, 1.0);
    CHECK(quantize_value(9.4, q).code == 7);
    CHECK(quantize_value(-100.0, q).code == -8);
}

TEST_CASE("uniform quantization rounds to the nearest grid point") {
    const auto r = quantize_value(1.3, Quantizer::uniform(4, 0.5));
    CHECK(r.code == 3);
    CHECK(r.value == doctest::Approx(1.5));
    CHECK(dequantize(3, Quantizer::uniform(4, 0.5)) == doctest::Approx(1.5));
}

TEST_CASE("quantization is idempotent") {
    Rng rng(3);
    const auto u = Quantizer::uniform(4, 0.37);
    const auto nu = Quantizer::from_codebook({-0.9, -0.2, 0.0, 0.4});
    for (int i = 0; i < 1000; ++i) {
        const double x = rng.uniform(-4, 4);
        for (const auto* q : {&u, &nu}) {
            const auto a = quantize_value(x, *q);
            const auto b = quantize_value(a.value, *q);
            CHECK(a.code == b.code);
            CHECK(a.value == b.value);
        }
    }
}

TEST_CASE("codebook ties resolve to the lower entry") {
    const auto q = Quantizer::from_codebook({-1.0, 0.0, 1.0, 2.0});
    CHECK(quantize_value(0.5, q).value == 0.0);
    CHECK(quantize_value(-0.5, q).value == -1.0);
}

TEST_CASE("codebooks must be ascending and sized to the bit width") {
    CHECK_THROWS_AS(Quantizer::from_codebook({1.0, -1.0}).validate(), Error);
    CHECK_THROWS_AS(Quantizer::from_codebook({-1.0, 0.0, 1.0}).validate(), Error);
}

TEST_CASE("fit_codebook recovers exact clusters") {
    const std::vector<double> v{-1, -1, 1, 1};
    const auto cb = fit_codebook(v, 1, 5);
    REQUIRE(cb.size() == 2);
    CHECK(cb[0] == doctest::Approx(-1.0));
    CHECK(cb[1] == doctest::Approx(1.0));
}

TEST_CASE("fit_codebook is no worse than a uniform grid") {
    Rng rng(11);
    std::vector<double> v(2000);
    for (auto& x : v) x = rng.uniform();
    const auto cb = fit_codebook(v, 2, 1);
    REQUIRE(cb.size() == 4);
    auto mse = [&](const std::vector<double>& grid) {
        double s = 0;
        for (double x : v) {
            double best = 1e300;
            for (double g : grid) best = std::min(best, (x - g) * (x - g));
            s += best;
        }
        return s / static_cast<double>(v.size());
    };
    CHECK(mse(cb) <= mse({0.125, 0.375, 0.625, 0.875}) + 1e-12);
}

TEST_CASE("fit_codebook on a repeated value") {
    const std::vector<double> v(10, 0.25);
    for (double c : fit_codebook(v, 2, 0)) CHECK(c == doctest::Approx(0.25));
    CHECK_THROWS_AS(fit_codebook(std::vector<double>{}, 2, 0), InputError);
}

TEST_CASE("requantize applies relu and saturation") {
    CHECK(requantize(5, 1.0, 1.0, 4, true) == 5);
    CHECK(requantize(-5, 1.0, 1.0, 4, true) == 0);
    CHECK(requantize(-5, 1.0, 1.0, 4, false) == -5);
    CHECK(requantize(100, 1.0, 1.0, 4, false) == 7);
    CHECK(requantize(10, 0.5, 1.0, 8, false) == 5);
}

TEST_CASE("softmax codes are non-negative and peak at the largest score") {
    const std::vector<std::int64_t> s{1, 5, -3, 2};
    const auto p = softmax_codes(s, 0.5, 8);
    REQUIRE(p.size() == 4);
    for (auto c : p) CHECK(c >= 0);
    CHECK(p[1] == *std::max_element(p.begin(), p.end()));
}
