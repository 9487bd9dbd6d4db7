// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#include "apu/quant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "apu/error.hpp"
#include "apu/rng.hpp"

namespace apu {

std::string to_string(QuantScheme s) {
    return s == QuantScheme::UniformSymmetric ? "uniform-symmetric" : "nonuniform-codebook";
}

QuantScheme parse_quant_scheme(const std::string& s) {
    if (s == "uniform-symmetric" || s == "uniform") return QuantScheme::UniformSymmetric;
    if (s == "nonuniform-codebook" || s == "nonuniform" || s == "codebook") return QuantScheme::NonuniformCodebook;
    throw InputError("unknown quantization scheme '" + s + "'");
}

Quantizer Quantizer::uniform(int bits, double scale) {
    Quantizer q;
    q.bits = bits;
    q.scale = scale;
    q.validate();
    return q;
}

Quantizer Quantizer::from_codebook(std::vector<double> codebook) {
    Quantizer q;
    q.scheme = QuantScheme::NonuniformCodebook;
    int b = 0;
    while ((std::size_t{1} << b) < codebook.size()) ++b;
    q.bits = b;
    q.codebook = std::move(codebook);
    q.validate();
    std::size_t best = 0;
    for (std::size_t i = 1; i < q.codebook.size(); ++i)
        if (std::abs(q.codebook[i]) < std::abs(q.codebook[best])) best = i;
    q.zero_ = static_cast<std::int64_t>(best);
    return q;
}

std::int64_t Quantizer::min_code() const {
    if (scheme == QuantScheme::NonuniformCodebook) return -zero_index();
    return -(std::int64_t{1} << (bits - 1));
}

std::int64_t Quantizer::max_code() const {
    if (scheme == QuantScheme::NonuniformCodebook) return static_cast<std::int64_t>(codebook.size()) - 1 - zero_index();
    return (std::int64_t{1} << (bits - 1)) - 1;
}

void Quantizer::validate() const {
    if (scheme == QuantScheme::UniformSymmetric) {
        if (bits < 2 || bits > 32) throw InputError("uniform quantizer width must be in [2,32], got " + std::to_string(bits));
        if (!(scale > 0.0) || !std::isfinite(scale)) throw InputError("uniform quantizer scale must be > 0");
    } else {
        if (codebook.empty() || codebook.size() != (std::size_t{1} << bits))
            throw InputError("codebook size " + std::to_string(codebook.size()) + " must equal 2^" + std::to_string(bits));
        for (auto c : codebook)
            if (!std::isfinite(c)) throw InputError("codebook entry is not finite");
        if (!std::is_sorted(codebook.begin(), codebook.end())) throw InputError("codebook must be in ascending order");
    }
}

QuantizedValue quantize_value(double x, const Quantizer& q) {
    if (q.scheme == QuantScheme::UniformSymmetric) {
        double r = std::round(x / q.scale);
        r = std::clamp(r, static_cast<double>(q.min_code()), static_cast<double>(q.max_code()));
        if (std::isnan(r)) r = 0.0;
        auto code = static_cast<std::int64_t>(r);
        return {code, static_cast<double>(code) * q.scale};
    }
    std::size_t best = 0;
    double best_d = std::abs(x - q.codebook[0]);
    for (std::size_t i = 1; i < q.codebook.size(); ++i) {
        double d = std::abs(x - q.codebook[i]);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return {static_cast<std::int64_t>(best) - q.zero_index(), q.codebook[best]};
}

double dequantize(std::int64_t code, const Quantizer& q) {
    if (q.scheme == QuantScheme::UniformSymmetric) return static_cast<double>(code) * q.scale;
    return q.codebook.at(static_cast<std::size_t>(code + q.zero_index()));
}

LayerQuant LayerQuant::uniform(int bits, double weight_scale, double output_scale) {
    LayerQuant lq;
    lq.weights = Quantizer::uniform(bits, weight_scale);
    lq.weight_scale = weight_scale;
    lq.output_scale = output_scale;
    return lq;
}

LayerQuant LayerQuant::nonuniform(std::vector<double> codebook, double output_scale) {
    LayerQuant lq;
    lq.weights = Quantizer::from_codebook(std::move(codebook));
    const int grid_bits = 2 * lq.weights.bits;
    double peak = 0.0;
    for (auto c : lq.weights.codebook) peak = std::max(peak, std::abs(c));
    const double qmax = static_cast<double>((std::int64_t{1} << (grid_bits - 1)) - 1);
    lq.weight_scale = peak > 0.0 ? peak / qmax : 1.0;
    for (auto c : lq.weights.codebook) lq.decode_table.push_back(std::llround(c / lq.weight_scale));
    lq.output_scale = output_scale;
    return lq;
}

std::int64_t LayerQuant::decode(std::int64_t code) const {
    if (weights.scheme == QuantScheme::UniformSymmetric) return code;
    return decode_table.at(static_cast<std::size_t>(code + weights.zero_index()));
}

int LayerQuant::operand_bits() const {
    return weights.scheme == QuantScheme::UniformSymmetric ? weights.bits : 2 * weights.bits;
}

const LayerQuant& QuantSpec::layer(const std::string& name) const {
    auto it = layers.find(name);
    if (it == layers.end()) throw InputError("quantization spec has no entry for layer '" + name + "'");
    return it->second;
}

void QuantSpec::validate() const {
    if (weight_bits != 4 && weight_bits != 8 && weight_bits != 16)
        throw InputError("weight_bits must be 4, 8 or 16, got " + std::to_string(weight_bits));
    if (activation_bits < 2 || activation_bits > 16)
        throw InputError("activation_bits must be in [2,16], got " + std::to_string(activation_bits));
    if (scheme == QuantScheme::NonuniformCodebook && weight_bits > 8)
        throw InputError("nonuniform codebooks are limited to 8 bits");
    if (!(input_scale > 0.0)) throw InputError("input scale must be > 0");
    for (const auto& [name, lq] : layers) {
        lq.weights.validate();
        if (lq.weights.scheme != scheme) throw InputError("layer '" + name + "' uses a different quantization scheme");
        if (!(lq.output_scale > 0.0) || !(lq.weight_scale > 0.0))
            throw InputError("layer '" + name + "' has a non-positive scale");
    }
}

std::int64_t act_qmax(int bits) { return (std::int64_t{1} << (bits - 1)) - 1; }

std::int64_t requantize(std::int64_t acc, double acc_scale, double out_scale, int bits, bool relu) {
    if (relu && acc < 0) acc = 0;
    return quantize_value(static_cast<double>(acc) * acc_scale, Quantizer::uniform(bits, out_scale)).code;
}

double softmax_prob_scale(int bits) { return 1.0 / static_cast<double>(act_qmax(bits)); }

std::vector<std::int64_t> softmax_codes(std::span<const std::int64_t> scores, double score_scale, int bits) {
    std::vector<std::int64_t> out(scores.size(), 0);
    if (scores.empty()) return out;
    const std::int64_t top = *std::max_element(scores.begin(), scores.end());
    std::vector<double> e(scores.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        e[i] = std::exp(static_cast<double>(scores[i] - top) * score_scale);
        sum += e[i];
    }
    const auto q = Quantizer::uniform(bits, softmax_prob_scale(bits));
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = quantize_value(e[i] / sum, q).code;
    return out;
}

std::int64_t bias_int(double b, double acc_scale) {
    double r = std::round(b / acc_scale);
    constexpr double lim = 4.0e18;
    return static_cast<std::int64_t>(std::clamp(r, -lim, lim));
}

namespace {

double lloyd(const std::vector<double>& sorted, std::vector<double>& c, int iters) {
    const std::size_t k = c.size();
    std::vector<double> sum(k);
    std::vector<std::size_t> cnt(k);
    double mse = 0.0;
    for (int it = 0; it <= iters; ++it) {
        std::sort(c.begin(), c.end());
        std::fill(sum.begin(), sum.end(), 0.0);
        std::fill(cnt.begin(), cnt.end(), 0);
        mse = 0.0;
        std::size_t j = 0;
        for (double v : sorted) {
            // Sorted input: the nearest centroid index never decreases.
            while (j + 1 < k && std::abs(v - c[j + 1]) < std::abs(v - c[j])) ++j;
            sum[j] += v;
            ++cnt[j];
            mse += (v - c[j]) * (v - c[j]);
        }
        if (it == iters) break;
        bool moved = false;
        for (std::size_t i = 0; i < k; ++i) {
            if (!cnt[i]) continue;
            double nc = sum[i] / static_cast<double>(cnt[i]);
            if (nc != c[i]) moved = true;
            c[i] = nc;
        }
        if (!moved) break;
    }
    return mse / static_cast<double>(sorted.size());
}

}  // namespace

std::vector<double> fit_codebook(std::span<const double> values, int bits, std::uint64_t seed) {
    if (values.empty()) throw InputError("fit_codebook: no values");
    if (bits < 1 || bits > 16) throw InputError("fit_codebook: bits must be in [1,16]");
    const std::size_t k = std::size_t{1} << bits;
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> distinct = sorted;
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() <= k) {
        std::vector<double> cb = distinct;
        while (cb.size() < k) cb.push_back(distinct.back());
        std::sort(cb.begin(), cb.end());
        return cb;
    }

    const std::size_t n = sorted.size();
    const double lo = sorted.front(), hi = sorted.back();
    std::vector<std::vector<double>> inits;
    std::vector<double> grid(k), quant(k), rnd(k);
    for (std::size_t j = 0; j < k; ++j) {
        grid[j] = lo + (static_cast<double>(j) + 0.5) * (hi - lo) / static_cast<double>(k);
        quant[j] = sorted[std::min(n - 1, (2 * j + 1) * n / (2 * k))];
    }
    Rng rng(seed);
    std::vector<std::size_t> idx(distinct.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rng.shuffle(idx);
    for (std::size_t j = 0; j < k; ++j) rnd[j] = distinct[idx[j]];
    inits = {grid, quant, rnd};

    std::vector<double> best;
    double best_mse = std::numeric_limits<double>::infinity();
    for (auto& c : inits) {
        double mse = lloyd(sorted, c, 100);
        if (mse < best_mse) {
            best_mse = mse;
            best = c;
        }
    }
    std::sort(best.begin(), best.end());
    return best;
}

std::vector<double> fit_layer_codebook(std::span<const double> values, int bits, std::uint64_t seed) {
    std::vector<double> nz;
    for (double v : values)
        if (v != 0.0) nz.push_back(v);
    if (nz.empty()) return std::vector<double>(std::size_t{1} << bits, 0.0);
    // Fit all 2^bits centroids, then swap the one nearest zero for an exact zero.
    std::vector<double> free = fit_codebook(nz, bits, seed);
    std::size_t drop = 0;
    for (std::size_t i = 1; i < free.size(); ++i)
        if (std::abs(free[i]) < std::abs(free[drop])) drop = i;
    free.erase(free.begin() + static_cast<std::ptrdiff_t>(drop));
    free.push_back(0.0);
    std::sort(free.begin(), free.end());
    return free;
}

}  // namespace apu
