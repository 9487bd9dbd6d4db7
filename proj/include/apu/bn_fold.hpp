// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <set>
#include <string>

#include "apu/model.hpp"

namespace apu::mapper {

// prev followed by bn, as one FullyConnected or Conv2D layer (named after prev).
ir::Layer fold_batchnorm(const ir::BatchNorm& bn, const ir::Layer& prev);

// BN with no foldable predecessor: a 1x1 depthwise conv on [C,H,W] inputs,
// or a diagonal FullyConnected (C blocks of 1x1) on [C] inputs.
ir::Layer lower_batchnorm(const ir::BatchNorm& bn, const Shape& input, const std::string& name);

struct FoldResult {
    ir::NetworkModel model;
    std::set<std::string> diagonal_fc;  // lowered standalone BNs on flat inputs
};

FoldResult fold_batchnorms(const ir::NetworkModel& model);

}  // namespace apu::mapper
