// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

namespace apu {

// 4-bit-equivalent op count of one PE cycle: every multiplier counts 2 per
// 4x4-bit slice, every tree adder ceil(product_bits / 4).
inline std::size_t slices4(int bits) { return static_cast<std::size_t>((bits + 3) / 4); }

inline std::size_t normalized_ops_per_cycle(std::size_t width, int weight_bits, int activation_bits) {
    if (width == 0) return 0;
    const std::size_t mul = 2 * slices4(weight_bits) * slices4(activation_bits);
    const std::size_t add = slices4(weight_bits + activation_bits);
    return width * mul + (width - 1) * add;
}

}  // namespace apu
