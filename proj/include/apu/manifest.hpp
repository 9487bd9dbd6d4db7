// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include "apu/compress.hpp"
#include "apu/config.hpp"
#include "apu/json_io.hpp"

namespace apu {

// A layer-shape manifest lists layers with their own input shapes and no
// weights; each layer is mapped on its own. FC layers name a block count,
// the block masks are drawn from the seed.
bool is_layer_manifest(const json& j);
prune::CompressedModel manifest_from_json(const json& j, const AcceleratorConfig& cfg, std::uint64_t seed,
                                          const std::string& origin = "manifest");
prune::CompressedModel load_manifest(const std::filesystem::path& path, const AcceleratorConfig& cfg, std::uint64_t seed);

}  // namespace apu
