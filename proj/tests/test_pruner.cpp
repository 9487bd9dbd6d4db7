// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#include <set>
#include <string>

#include "apu/error.hpp"
#include "apu/pruner.hpp"
#include "apu/rng.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace apu;
using namespace apu::prune;
using apu::testing::random_real;

namespace {

// Brute force: permute rows and columns by the stored permutations and check
// that every nonzero sits inside one of the contiguous diagonal tiles.
bool permuted_block_diagonal(const BlockMask& m) {
    const std::size_t R = m.rows(), C = m.cols(), nb = m.num_blocks();
    std::vector<std::size_t> rb(R), cb(C);
    for (std::size_t k = 0, i = 0; k < nb; ++k)
        for (std::size_t n = 0; n < R / nb + (k < R % nb ? 1 : 0); ++n) rb[i++] = k;
    for (std::size_t k = 0, j = 0; k < nb; ++k)
        for (std::size_t n = 0; n < C / nb + (k < C % nb ? 1 : 0); ++n) cb[j++] = k;
    for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = 0; j < C; ++j)
            if (m.at(m.row_perm()[i], m.col_perm()[j]) != (rb[i] == cb[j])) return false;
    return true;
}

std::size_t count_nonzero(const Tensor& t) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < t.numel(); ++i) n += t.value(i) != 0.0;
    return n;
}

}  // namespace

TEST_CASE("identity-permuted two-block mask") {
    const auto m = BlockMask::identity(4, 4, 2);
    CHECK(m.nonzeros() == 8);
    const std::vector<std::uint8_t> want{1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1};
    CHECK(m.dense_bits() == want);
}

TEST_CASE("4000x4000 with 10 blocks keeps a tenth of the weights") {
    const auto m = generate_mask(4000, 4000, 10, 123);
    CHECK(m.nonzeros() == 1'600'000);
}

TEST_CASE("6x4 two-block mask is block diagonal after its permutations") {
    const auto m = generate_mask(6, 4, 2, 7);
    std::size_t ones = 0;
    for (auto b : m.dense_bits()) ones += b;
    CHECK(ones == 12);
    CHECK(m.nonzeros() == 12);
    CHECK(permuted_block_diagonal(m));
}

TEST_CASE("random masks are block diagonal and exclusive") {
    Rng rng(17);
    for (int t = 0; t < 200; ++t) {
        const std::size_t R = 1 + rng.below(40), C = 1 + rng.below(40);
        const std::size_t nb = 1 + rng.below(std::min(R, C));
        const auto m = generate_mask(R, C, nb, rng.next());
        CHECK(permuted_block_diagonal(m));
        // Rows sharing a column share all of them: column sets are equal or disjoint.
        std::set<std::set<std::size_t>> groups;
        for (std::size_t r = 0; r < R; ++r) {
            std::set<std::size_t> cols;
            for (std::size_t c = 0; c < C; ++c)
                if (m.at(r, c)) cols.insert(c);
            CHECK(!cols.empty());
            groups.insert(cols);
        }
        CHECK(groups.size() == nb);
        std::size_t covered = 0;
        for (const auto& g : groups) covered += g.size();
        CHECK(covered == C);
        const auto bits = m.dense_bits();
        std::size_t ones = 0;
        for (auto b : bits) ones += b;
        CHECK(ones == m.nonzeros());
    }
}

TEST_CASE("mask generation is deterministic and seed-dependent") {
    CHECK(generate_mask(50, 30, 5, 9) == generate_mask(50, 30, 5, 9));
    CHECK(generate_mask(50, 30, 5, 9).dense_bits() == generate_mask(50, 30, 5, 9).dense_bits());
    CHECK_FALSE(generate_mask(50, 30, 5, 9) == generate_mask(50, 30, 5, 10));
}

TEST_CASE("block counts above the smaller dimension are rejected") {
    CHECK_THROWS_AS(generate_mask(4, 3, 4, 0), InputError);
    CHECK_THROWS_AS(generate_mask(4, 3, 0, 0), InputError);
}

TEST_CASE("apply_mask") {
    const auto ones = Tensor::real({4, 4}, std::vector<double>(16, 1.0));
    const auto masked = apply_mask(ones, BlockMask::identity(4, 4, 2));
    CHECK(count_nonzero(masked) == 8);
    CHECK(masked.value(0) == 1.0);
    CHECK(masked.value(2) == 0.0);
    CHECK(apply_mask(ones, BlockMask::dense(4, 4)) == ones);

    Rng rng(2);
    const auto w = random_real({30, 20}, rng, 1.0);
    const auto m = generate_mask(30, 20, 4, 77);
    CHECK(count_nonzero(apply_mask(w, m)) == m.nonzeros());
}

TEST_CASE("pack_blocks extracts diagonal sub-matrices") {
    std::vector<double> v(16);
    for (std::size_t i = 0; i < 16; ++i) v[i] = static_cast<double>(i + 1);
    const auto mask = BlockMask::identity(4, 4, 2);
    const auto w = apply_mask(Tensor::real({4, 4}, v), mask);
    const auto packed = pack_blocks(w, mask);
    REQUIRE(packed.num_blocks() == 2);
    const auto& b0 = packed.blocks[0].weights;
    const auto& b1 = packed.blocks[1].weights;
    CHECK(std::vector<double>(b0.reals().begin(), b0.reals().end()) == std::vector<double>{1, 2, 5, 6});
    CHECK(std::vector<double>(b1.reals().begin(), b1.reals().end()) == std::vector<double>{11, 12, 15, 16});
}

TEST_CASE("pack and unpack round trip") {
    Rng rng(31);
    for (int t = 0; t < 200; ++t) {
        const std::size_t nb = std::size_t{1} << rng.below(4);
        const std::size_t R = nb + rng.below(40), C = nb + rng.below(40);
        const auto mask = generate_mask(R, C, nb, rng.next());
        const auto w = apply_mask(random_real({R, C}, rng, 1.0), mask);
        const auto b = random_real({R}, rng, 1.0);
        const auto packed = pack_blocks(w, mask, nullptr, &b);
        const auto [w2, b2] = unpack_blocks(packed);
        CHECK(w2 == w);
        CHECK(b2 == b);
    }
    const auto mask = generate_mask(40, 40, 4, 3);
    const auto w = apply_mask(random_real({40, 40}, rng, 1.0), mask);
    CHECK(unpack_blocks(pack_blocks(w, mask)).first == w);
}

TEST_CASE("4000x4000 packs into ten 400x400 blocks") {
    const auto mask = generate_mask(4000, 4000, 10, 1);
    const auto layer = pack_shape_only(mask, 4);
    REQUIRE(layer.num_blocks() == 10);
    for (const auto& b : layer.blocks) {
        CHECK(b.rows() == 400);
        CHECK(b.cols() == 400);
    }
}

TEST_CASE("packing weights that violate the mask lists coordinates") {
    const auto mask = BlockMask::identity(4, 4, 2);
    std::vector<double> v(16, 0.0);
    v[0 * 4 + 3] = 1.0;
    try {
        pack_blocks(Tensor::real({4, 4}, v), mask);
        FAIL("expected a violation");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("(0,3)") != std::string::npos);
    }
}

TEST_CASE("quantized packing stores codes") {
    const auto mask = BlockMask::identity(2, 2, 2);
    const auto w = Tensor::real({2, 2}, {1.0, 0.0, 0.0, -1.0});
    const auto q = Quantizer::uniform(4, 0.5);
    const auto layer = pack_blocks(w, mask, &q);
    CHECK(layer.blocks[0].weights.is_int());
    CHECK(layer.blocks[0].weights.ints()[0] == 2);
    CHECK(layer.blocks[1].weights.ints()[0] == -2);
}
