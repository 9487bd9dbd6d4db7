// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#include "apu/tensor.hpp"

#include <sstream>

#include "apu/error.hpp"

namespace apu {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

bool fits_signed(std::int64_t v, int bits) {
    if (bits >= 64) return true;
    const std::int64_t lo = -(std::int64_t{1} << (bits - 1));
    const std::int64_t hi = (std::int64_t{1} << (bits - 1)) - 1;
    return v >= lo && v <= hi;
}

int signed_bits_for(std::int64_t lo, std::int64_t hi) {
    int b = 1;
    while (b < 64 && !(fits_signed(lo, b) && fits_signed(hi, b))) ++b;
    return b;
}

Tensor Tensor::real(Shape shape, std::vector<double> data) {
    if (shape_numel(shape) != data.size())
        throw ShapeError("tensor of shape " + shape_str(shape) + " given " + std::to_string(data.size()) + " elements");
    Tensor t;
    t.shape_ = std::move(shape);
    t.real_ = std::move(data);
    t.has_data_ = true;
    return t;
}

Tensor Tensor::real_zeros(Shape shape) {
    auto n = shape_numel(shape);
    return real(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::integer(Shape shape, std::vector<std::int64_t> data, int bits) {
    if (bits < 1 || bits > 64) throw InputError("integer tensor width must be in [1,64], got " + std::to_string(bits));
    if (shape_numel(shape) != data.size())
        throw ShapeError("tensor of shape " + shape_str(shape) + " given " + std::to_string(data.size()) + " elements");
    for (std::size_t i = 0; i < data.size(); ++i)
        if (!fits_signed(data[i], bits))
            throw InputError("element " + std::to_string(i) + " = " + std::to_string(data[i]) + " does not fit int" +
                             std::to_string(bits));
    Tensor t;
    t.shape_ = std::move(shape);
    t.dtype_ = DType::Int;
    t.bits_ = bits;
    t.int_ = std::move(data);
    t.has_data_ = true;
    return t;
}

Tensor Tensor::shape_only(Shape shape, DType dtype, int bits) {
    Tensor t;
    t.shape_ = std::move(shape);
    t.dtype_ = dtype;
    t.bits_ = bits;
    return t;
}

std::span<const double> Tensor::reals() const {
    if (dtype_ != DType::Real || !has_data_) throw InternalError("tensor has no real storage");
    return real_;
}
std::span<double> Tensor::reals() {
    if (dtype_ != DType::Real || !has_data_) throw InternalError("tensor has no real storage");
    return real_;
}
std::span<const std::int64_t> Tensor::ints() const {
    if (dtype_ != DType::Int || !has_data_) throw InternalError("tensor has no integer storage");
    return int_;
}
std::span<std::int64_t> Tensor::ints() {
    if (dtype_ != DType::Int || !has_data_) throw InternalError("tensor has no integer storage");
    return int_;
}

double Tensor::value(std::size_t flat) const {
    if (!has_data_) throw InternalError("shape-only tensor has no values");
    return dtype_ == DType::Int ? static_cast<double>(int_.at(flat)) : real_.at(flat);
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_numel(shape) != numel())
        throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    Tensor t = *this;
    t.shape_ = std::move(shape);
    return t;
}

bool Tensor::operator==(const Tensor& o) const {
    return shape_ == o.shape_ && dtype_ == o.dtype_ && has_data_ == o.has_data_ &&
           (dtype_ == DType::Real ? real_ == o.real_ : (bits_ == o.bits_ && int_ == o.int_));
}

}  // namespace apu
