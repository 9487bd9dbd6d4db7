// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace apu {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

enum class DType { Real, Int };

// Dense row-major tensor. Integer tensors carry an explicit two's-complement
// width; every element is checked to fit. A tensor may also be shape-only
// (no storage), which the mapper uses for layer-shape manifests.
class Tensor {
public:
    Tensor() = default;

    static Tensor real(Shape shape, std::vector<double> data);
    static Tensor real_zeros(Shape shape);
    static Tensor integer(Shape shape, std::vector<std::int64_t> data, int bits);
    static Tensor shape_only(Shape shape, DType dtype = DType::Real, int bits = 64);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t numel() const { return shape_numel(shape_); }
    bool empty() const { return shape_.empty(); }

    DType dtype() const { return dtype_; }
    bool is_int() const { return dtype_ == DType::Int; }
    int bits() const { return bits_; }
    bool has_data() const { return has_data_; }

    std::span<const double> reals() const;
    std::span<double> reals();
    std::span<const std::int64_t> ints() const;
    std::span<std::int64_t> ints();

    // Element as a double regardless of dtype.
    double value(std::size_t flat) const;

    Tensor reshaped(Shape shape) const;

    bool operator==(const Tensor& other) const;

private:
    Shape shape_;
    DType dtype_ = DType::Real;
    int bits_ = 64;
    bool has_data_ = false;
    std::vector<double> real_;
    std::vector<std::int64_t> int_;
};

bool fits_signed(std::int64_t v, int bits);
int signed_bits_for(std::int64_t lo, std::int64_t hi);

}  // namespace apu
