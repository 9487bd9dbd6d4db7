// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace apu {

enum class QuantScheme { UniformSymmetric, NonuniformCodebook };

std::string to_string(QuantScheme s);
QuantScheme parse_quant_scheme(const std::string& s);

struct Quantizer {
    int bits = 4;
    QuantScheme scheme = QuantScheme::UniformSymmetric;
    double scale = 1.0;            // uniform
    std::vector<double> codebook;  // nonuniform, ascending, 2^bits entries

    static Quantizer uniform(int bits, double scale);
    static Quantizer from_codebook(std::vector<double> codebook);

    // Codebook codes count from the entry nearest zero, so 0.0 always encodes as 0.
    std::int64_t zero_index() const { return scheme == QuantScheme::UniformSymmetric ? 0 : zero_; }
    std::int64_t min_code() const;
    std::int64_t max_code() const;
    void validate() const;

private:
    std::int64_t zero_ = 0;
};

struct QuantizedValue {
    std::int64_t code;
    double value;
};

// Uniform: clamp(round-half-away(x/scale)). Nonuniform: nearest codebook
// entry, ties to the lower index. Saturating, never throws.
QuantizedValue quantize_value(double x, const Quantizer& q);
double dequantize(std::int64_t code, const Quantizer& q);

// Fixed-point parameters of one layer. Weights are stored as codes of
// `weights`; the PE multiplies decode(code), an integer on the
// `weight_scale` grid. For the uniform scheme decode is the identity.
struct LayerQuant {
    Quantizer weights;
    double weight_scale = 1.0;
    std::vector<std::int64_t> decode_table;  // nonuniform only
    double output_scale = 1.0;
    // Multi-head attention intermediates.
    double q_scale = 1.0, k_scale = 1.0, v_scale = 1.0, head_scale = 1.0;

    static LayerQuant uniform(int bits, double weight_scale, double output_scale);
    static LayerQuant nonuniform(std::vector<double> codebook, double output_scale);

    std::int64_t decode(std::int64_t code) const;
    std::int64_t weight_int(double w) const { return decode(quantize_value(w, weights).code); }
    int operand_bits() const;
};

struct QuantSpec {
    int weight_bits = 4;
    int activation_bits = 4;
    QuantScheme scheme = QuantScheme::UniformSymmetric;
    double input_scale = 1.0;
    std::map<std::string, LayerQuant> layers;

    Quantizer activation(double scale) const { return Quantizer::uniform(activation_bits, scale); }
    const LayerQuant& layer(const std::string& name) const;
    void validate() const;
};

std::int64_t act_qmax(int bits);

// acc is an exact integer accumulator whose unit is acc_scale; ReLU (if any)
// is applied at full width, then one rounding to the output grid.
std::int64_t requantize(std::int64_t acc, double acc_scale, double out_scale, int bits, bool relu);

// Host softmax over raw integer scores; probabilities use scale 1/qmax.
std::vector<std::int64_t> softmax_codes(std::span<const std::int64_t> scores, double score_scale, int bits);
double softmax_prob_scale(int bits);

std::int64_t bias_int(double b, double acc_scale);

std::vector<double> fit_codebook(std::span<const double> values, int bits, std::uint64_t seed);
// Codebook that always contains an exact 0.0 (pruned weights must decode to
// zero); the other entries are fitted to the nonzero values.
std::vector<double> fit_layer_codebook(std::span<const double> values, int bits, std::uint64_t seed);

}  // namespace apu
