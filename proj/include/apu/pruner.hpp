// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "apu/quant.hpp"
#include "apu/tensor.hpp"

namespace apu::prune {

// Half-open range of block k when n items are split into nb nearly equal
// parts (sizes differ by at most one; the first n % nb blocks are larger).
std::pair<std::size_t, std::size_t> block_range(std::size_t n, std::size_t nb, std::size_t k);
std::size_t block_of(std::size_t n, std::size_t nb, std::size_t pos);

// row_perm[i] is the original row placed at permuted position i. Under the
// permutation the mask is block diagonal: M[row_perm[i]][col_perm[j]] = 1
// iff positions i and j fall into the same block.
class BlockMask {
public:
    BlockMask() = default;
    BlockMask(std::size_t rows, std::size_t cols, std::size_t num_blocks, std::vector<std::size_t> row_perm,
              std::vector<std::size_t> col_perm);
    static BlockMask identity(std::size_t rows, std::size_t cols, std::size_t num_blocks);
    static BlockMask dense(std::size_t rows, std::size_t cols) { return identity(rows, cols, 1); }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t num_blocks() const { return num_blocks_; }
    const std::vector<std::size_t>& row_perm() const { return row_perm_; }
    const std::vector<std::size_t>& col_perm() const { return col_perm_; }

    bool at(std::size_t r, std::size_t c) const { return row_block_[r] == col_block_[c]; }
    std::size_t nonzeros() const;
    std::vector<std::uint8_t> dense_bits() const;

    bool operator==(const BlockMask& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && num_blocks_ == o.num_blocks_ && row_perm_ == o.row_perm_ &&
               col_perm_ == o.col_perm_;
    }

private:
    std::size_t rows_ = 0, cols_ = 0, num_blocks_ = 0;
    std::vector<std::size_t> row_perm_, col_perm_;
    std::vector<std::size_t> row_block_, col_block_;  // by original index
};

BlockMask generate_mask(std::size_t rows, std::size_t cols, std::size_t num_blocks, std::uint64_t seed);
Tensor apply_mask(const Tensor& w, const BlockMask& mask);

struct DenseBlock {
    Tensor weights;  // [rows, cols]; codes when the layer is quantized
    Tensor bias;     // [rows]
    std::size_t row_offset = 0;  // into row_perm
    std::size_t col_offset = 0;  // into col_perm

    std::size_t rows() const { return weights.dim(0); }
    std::size_t cols() const { return weights.dim(1); }
};

struct BlockDiagonalLayer {
    std::vector<DenseBlock> blocks;
    std::vector<std::size_t> row_perm, col_perm;
    Shape original_shape;  // [rows, cols]
    std::optional<Quantizer> quant;

    std::size_t num_blocks() const { return blocks.size(); }
    // Original output / input indices owned by block k.
    std::vector<std::size_t> block_rows(std::size_t k) const;
    std::vector<std::size_t> block_cols(std::size_t k) const;
    std::size_t nonzeros() const;
};

// Weights at mask-zero positions must be exactly zero. With a quantizer the
// blocks hold quantization codes; the bias (if given) is copied unchanged.
BlockDiagonalLayer pack_blocks(const Tensor& w, const BlockMask& mask, const Quantizer* quant = nullptr,
                               const Tensor* bias = nullptr);
BlockDiagonalLayer pack_shape_only(const BlockMask& mask, int code_bits);
// Inverse of pack_blocks: dense [rows, cols] weights and [rows] bias.
std::pair<Tensor, Tensor> unpack_blocks(const BlockDiagonalLayer& layer);

}  // namespace apu::prune
