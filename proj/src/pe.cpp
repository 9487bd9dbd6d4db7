// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <string>

#include "apu/error.hpp"
#include "apu/quant.hpp"
#include "apu/simulator.hpp"
#include "apu/tensor.hpp"

namespace apu::sim {

std::size_t adder_stages(std::size_t n) {
    if (n <= 1) return 0;
    return static_cast<std::size_t>(std::bit_width(n - 1));
}

std::int64_t AdderTree::eval(std::span<const std::int64_t> products) const {
    if (products.size() > inputs) throw SimFault("adder tree fed " + std::to_string(products.size()) + " products, has " + std::to_string(inputs) + " inputs", 0);
    for (auto p : products)
        if (!fits_signed(p, product_bits))
            throw SimFault("product " + std::to_string(p) + " exceeds " + std::to_string(product_bits) + " bits", 0);
    if (products.empty()) return 0;
    std::vector<std::int64_t> level(products.begin(), products.end());
    std::size_t stage = 0;
    while (level.size() > 1) {
        ++stage;
        const int width = stage_width(stage);
        std::vector<std::int64_t> next((level.size() + 1) / 2);
        for (std::size_t i = 0; i + 1 < level.size(); i += 2) {
            next[i / 2] = level[i] + level[i + 1];
            if (!fits_signed(next[i / 2], width))
                throw SimFault("adder tree stage " + std::to_string(stage) + " overflows " + std::to_string(width) + " bits", 0);
        }
        if (level.size() % 2) next.back() = level.back();
        level = std::move(next);
    }
    return level[0];
}

std::int64_t adder_tree_eval(std::span<const std::int64_t> products, int product_bits) {
    return AdderTree{products.size(), product_bits}.eval(products);
}

std::int64_t pe_output_step(PeState& pe, std::size_t row, const PeOutputConfig& out) {
    if (row >= pe.rows) throw SimFault("row " + std::to_string(row) + " out of range for a " + std::to_string(pe.rows) + "-row block", 0);
    if (pe.latch.size() < pe.cols) throw SimFault("input latch not full", 0);
    std::vector<std::int64_t> prod(pe.cols);
    const std::int64_t* w = pe.weights.data() + row * pe.cols;
    for (std::size_t c = 0; c < pe.cols; ++c) prod[c] = w[c] * pe.latch[c];
    std::int64_t acc = AdderTree{pe.cols, pe.operand_bits + pe.activation_bits}.eval(prod);
    if (!pe.bias.empty()) acc += pe.bias[row];
    pe.cursor = row + 1;
    if (out.raw) return acc;
    return requantize(acc, out.acc_scale, out.out_scale, out.bits, out.relu);
}

int temporal_acc_bits(int operand_bits, int activation_bits, std::size_t pe_cols) {
    return operand_bits + activation_bits + static_cast<int>(adder_stages(pe_cols));
}

void pe_temporal_step(PeState& pe, std::size_t col) {
    if (col >= pe.cols || col >= pe.latch.size()) throw SimFault("temporal column " + std::to_string(col) + " out of range", 0);
    if (pe.psum.size() != pe.rows) pe.psum.assign(pe.rows, 0);
    const std::int64_t x = pe.latch[col];
    for (std::size_t r = 0; r < pe.rows; ++r) {
        pe.psum[r] += pe.weights[r * pe.cols + col] * x;
        if (!fits_signed(pe.psum[r], pe.acc_bits))
            throw SimFault("partial sum of row " + std::to_string(r) + " overflows " + std::to_string(pe.acc_bits) + " bits", 0);
    }
    pe.cursor = col + 1;
}

}  // namespace apu::sim
