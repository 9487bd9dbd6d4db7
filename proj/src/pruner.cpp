// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#include "apu/pruner.hpp"

#include <numeric>
#include <sstream>

#include "apu/error.hpp"
#include "apu/rng.hpp"

namespace apu::prune {

std::pair<std::size_t, std::size_t> block_range(std::size_t n, std::size_t nb, std::size_t k) {
    const std::size_t base = n / nb, extra = n % nb;
    const std::size_t begin = k * base + std::min(k, extra);
    return {begin, begin + base + (k < extra ? 1 : 0)};
}

std::size_t block_of(std::size_t n, std::size_t nb, std::size_t pos) {
    const std::size_t base = n / nb, extra = n % nb;
    const std::size_t big = extra * (base + 1);
    if (pos < big) return pos / (base + 1);
    return extra + (pos - big) / base;
}

BlockMask::BlockMask(std::size_t rows, std::size_t cols, std::size_t num_blocks, std::vector<std::size_t> row_perm,
                     std::vector<std::size_t> col_perm)
    : rows_(rows), cols_(cols), num_blocks_(num_blocks), row_perm_(std::move(row_perm)), col_perm_(std::move(col_perm)) {
    if (num_blocks == 0 || num_blocks > std::min(rows, cols))
        throw InputError("num_blocks " + std::to_string(num_blocks) + " must be in [1, min(rows, cols) = " +
                         std::to_string(std::min(rows, cols)) + "]");
    auto check_perm = [](const std::vector<std::size_t>& p, std::size_t n, const char* what) {
        if (p.size() != n) throw InputError(std::string(what) + " has wrong length");
        std::vector<bool> seen(n, false);
        for (auto v : p) {
            if (v >= n || seen[v]) throw InputError(std::string(what) + " is not a permutation");
            seen[v] = true;
        }
    };
    check_perm(row_perm_, rows, "row_perm");
    check_perm(col_perm_, cols, "col_perm");
    row_block_.resize(rows);
    col_block_.resize(cols);
    for (std::size_t i = 0; i < rows; ++i) row_block_[row_perm_[i]] = block_of(rows, num_blocks, i);
    for (std::size_t j = 0; j < cols; ++j) col_block_[col_perm_[j]] = block_of(cols, num_blocks, j);
}

BlockMask BlockMask::identity(std::size_t rows, std::size_t cols, std::size_t num_blocks) {
    std::vector<std::size_t> r(rows), c(cols);
    std::iota(r.begin(), r.end(), 0);
    std::iota(c.begin(), c.end(), 0);
    return BlockMask(rows, cols, num_blocks, std::move(r), std::move(c));
}

std::size_t BlockMask::nonzeros() const {
    std::size_t n = 0;
    for (std::size_t k = 0; k < num_blocks_; ++k) {
        auto [r0, r1] = block_range(rows_, num_blocks_, k);
        auto [c0, c1] = block_range(cols_, num_blocks_, k);
        n += (r1 - r0) * (c1 - c0);
    }
    return n;
}

std::vector<std::uint8_t> BlockMask::dense_bits() const {
    std::vector<std::uint8_t> m(rows_ * cols_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) m[r * cols_ + c] = at(r, c) ? 1 : 0;
    return m;
}

BlockMask generate_mask(std::size_t rows, std::size_t cols, std::size_t num_blocks, std::uint64_t seed) {
    if (num_blocks == 0 || num_blocks > std::min(rows, cols))
        throw InputError("cannot split a " + std::to_string(rows) + "x" + std::to_string(cols) + " matrix into " +
                         std::to_string(num_blocks) + " blocks");
    Rng rng(seed);
    std::vector<std::size_t> r(rows), c(cols);
    std::iota(r.begin(), r.end(), 0);
    std::iota(c.begin(), c.end(), 0);
    rng.shuffle(r);
    rng.shuffle(c);
    return BlockMask(rows, cols, num_blocks, std::move(r), std::move(c));
}

Tensor apply_mask(const Tensor& w, const BlockMask& mask) {
    if (w.rank() != 2 || w.dim(0) != mask.rows() || w.dim(1) != mask.cols())
        throw ShapeError("weights " + shape_str(w.shape()) + " do not match mask [" + std::to_string(mask.rows()) + "," +
                         std::to_string(mask.cols()) + "]");
    const std::size_t C = mask.cols();
    if (w.is_int()) {
        std::vector<std::int64_t> v(w.ints().begin(), w.ints().end());
        for (std::size_t i = 0; i < v.size(); ++i)
            if (!mask.at(i / C, i % C)) v[i] = 0;
        return Tensor::integer(w.shape(), std::move(v), w.bits());
    }
    std::vector<double> v(w.reals().begin(), w.reals().end());
    for (std::size_t i = 0; i < v.size(); ++i)
        if (!mask.at(i / C, i % C)) v[i] = 0.0;
    return Tensor::real(w.shape(), std::move(v));
}

std::vector<std::size_t> BlockDiagonalLayer::block_rows(std::size_t k) const {
    const auto& b = blocks.at(k);
    return {row_perm.begin() + static_cast<std::ptrdiff_t>(b.row_offset),
            row_perm.begin() + static_cast<std::ptrdiff_t>(b.row_offset + b.rows())};
}

std::vector<std::size_t> BlockDiagonalLayer::block_cols(std::size_t k) const {
    const auto& b = blocks.at(k);
    return {col_perm.begin() + static_cast<std::ptrdiff_t>(b.col_offset),
            col_perm.begin() + static_cast<std::ptrdiff_t>(b.col_offset + b.cols())};
}

std::size_t BlockDiagonalLayer::nonzeros() const {
    std::size_t n = 0;
    for (const auto& b : blocks) n += b.rows() * b.cols();
    return n;
}

BlockDiagonalLayer pack_blocks(const Tensor& w, const BlockMask& mask, const Quantizer* quant, const Tensor* bias) {
    if (w.rank() != 2 || w.dim(0) != mask.rows() || w.dim(1) != mask.cols())
        throw ShapeError("weights " + shape_str(w.shape()) + " do not match mask");
    const std::size_t R = mask.rows(), C = mask.cols();
    if (bias && (bias->rank() != 1 || bias->dim(0) != R)) throw ShapeError("bias does not match weight rows");

    std::vector<std::pair<std::size_t, std::size_t>> bad;
    std::size_t bad_total = 0;
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c)
            if (!mask.at(r, c) && w.value(r * C + c) != 0.0) {
                if (bad.size() < 16) bad.emplace_back(r, c);
                ++bad_total;
            }
    if (bad_total) {
        std::ostringstream os;
        os << "weights violate the block mask at " << bad_total << " position(s):";
        for (auto [r, c] : bad) os << " (" << r << "," << c << ")";
        if (bad_total > bad.size()) os << " ...";
        throw InputError(os.str());
    }

    BlockDiagonalLayer out;
    out.row_perm = mask.row_perm();
    out.col_perm = mask.col_perm();
    out.original_shape = {R, C};
    if (quant) out.quant = *quant;
    const int code_bits = quant ? quant->bits + (quant->scheme == QuantScheme::NonuniformCodebook ? 1 : 0) : 0;
    for (std::size_t k = 0; k < mask.num_blocks(); ++k) {
        auto [r0, r1] = block_range(R, mask.num_blocks(), k);
        auto [c0, c1] = block_range(C, mask.num_blocks(), k);
        const std::size_t br = r1 - r0, bc = c1 - c0;
        DenseBlock b;
        b.row_offset = r0;
        b.col_offset = c0;
        if (quant) {
            std::vector<std::int64_t> v(br * bc);
            for (std::size_t i = 0; i < br; ++i)
                for (std::size_t j = 0; j < bc; ++j)
                    v[i * bc + j] = quantize_value(w.value(out.row_perm[r0 + i] * C + out.col_perm[c0 + j]), *quant).code;
            b.weights = Tensor::integer({br, bc}, std::move(v), code_bits);
        } else if (w.is_int()) {
            std::vector<std::int64_t> v(br * bc);
            for (std::size_t i = 0; i < br; ++i)
                for (std::size_t j = 0; j < bc; ++j) v[i * bc + j] = w.ints()[out.row_perm[r0 + i] * C + out.col_perm[c0 + j]];
            b.weights = Tensor::integer({br, bc}, std::move(v), w.bits());
        } else {
            std::vector<double> v(br * bc);
            for (std::size_t i = 0; i < br; ++i)
                for (std::size_t j = 0; j < bc; ++j) v[i * bc + j] = w.reals()[out.row_perm[r0 + i] * C + out.col_perm[c0 + j]];
            b.weights = Tensor::real({br, bc}, std::move(v));
        }
        if (bias && bias->is_int()) {
            std::vector<std::int64_t> v(br);
            for (std::size_t i = 0; i < br; ++i) v[i] = bias->ints()[out.row_perm[r0 + i]];
            b.bias = Tensor::integer({br}, std::move(v), bias->bits());
        } else {
            std::vector<double> v(br, 0.0);
            if (bias)
                for (std::size_t i = 0; i < br; ++i) v[i] = bias->reals()[out.row_perm[r0 + i]];
            b.bias = Tensor::real({br}, std::move(v));
        }
        out.blocks.push_back(std::move(b));
    }
    return out;
}

BlockDiagonalLayer pack_shape_only(const BlockMask& mask, int code_bits) {
    BlockDiagonalLayer out;
    out.row_perm = mask.row_perm();
    out.col_perm = mask.col_perm();
    out.original_shape = {mask.rows(), mask.cols()};
    for (std::size_t k = 0; k < mask.num_blocks(); ++k) {
        auto [r0, r1] = block_range(mask.rows(), mask.num_blocks(), k);
        auto [c0, c1] = block_range(mask.cols(), mask.num_blocks(), k);
        DenseBlock b;
        b.row_offset = r0;
        b.col_offset = c0;
        b.weights = Tensor::shape_only({r1 - r0, c1 - c0}, DType::Int, code_bits);
        b.bias = Tensor::shape_only({r1 - r0}, DType::Int, 32);
        out.blocks.push_back(std::move(b));
    }
    return out;
}

std::pair<Tensor, Tensor> unpack_blocks(const BlockDiagonalLayer& layer) {
    const std::size_t R = layer.original_shape.at(0), C = layer.original_shape.at(1);
    if (layer.blocks.empty()) throw InputError("layer has no blocks");
    const bool ints = layer.blocks.front().weights.is_int();
    const bool bias_ints = layer.blocks.front().bias.is_int();
    std::vector<double> wr(ints ? 0 : R * C, 0.0), br(bias_ints ? 0 : R, 0.0);
    std::vector<std::int64_t> wi(ints ? R * C : 0, 0), bi(bias_ints ? R : 0, 0);
    for (const auto& b : layer.blocks) {
        for (std::size_t i = 0; i < b.rows(); ++i) {
            const std::size_t r = layer.row_perm[b.row_offset + i];
            for (std::size_t j = 0; j < b.cols(); ++j) {
                const std::size_t c = layer.col_perm[b.col_offset + j];
                if (ints)
                    wi[r * C + c] = b.weights.ints()[i * b.cols() + j];
                else
                    wr[r * C + c] = b.weights.reals()[i * b.cols() + j];
            }
            if (bias_ints)
                bi[r] = b.bias.ints()[i];
            else
                br[r] = b.bias.reals()[i];
        }
    }
    Tensor w = ints ? Tensor::integer({R, C}, std::move(wi), layer.blocks.front().weights.bits())
                    : Tensor::real({R, C}, std::move(wr));
    Tensor b = bias_ints ? Tensor::integer({R}, std::move(bi), layer.blocks.front().bias.bits()) : Tensor::real({R}, std::move(br));
    return {std::move(w), std::move(b)};
}

}  // namespace apu::prune
