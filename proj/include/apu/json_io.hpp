// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "apu/quant.hpp"
#include "apu/tensor.hpp"

namespace apu {

using json = nlohmann::ordered_json;

// Parses JSON text; syntax errors become ParseError with line/column.
json parse_json(const std::string& text, const std::string& origin);
json load_json(const std::filesystem::path& path);
std::string dump_json(const json& j);

// {shape, data, dtype} or {shape, fill:{kind, ...}}; shape-only tensors
// are accepted only when allow_shape_only is set.
Tensor tensor_from_json(const json& j, const std::string& what, bool allow_shape_only = false);
json tensor_to_json(const Tensor& t);

json quantizer_to_json(const Quantizer& q);
Quantizer quantizer_from_json(const json& j);
json quant_spec_to_json(const QuantSpec& q);
QuantSpec quant_spec_from_json(const json& j);

std::string dtype_name(const Tensor& t);

}  // namespace apu
