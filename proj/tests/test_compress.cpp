// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>

#include "apu/compress.hpp"
#include "apu/digest.hpp"
#include "apu/error.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace apu;
using namespace apu::prune;

namespace {

CompressedModel small_compressed(QuantScheme scheme) {
    Rng rng(6);
    ir::NetworkModel m;
    m.name = "small";
    m.input_shape = {24};
    m.layers.push_back(apu::testing::fc_layer("fc1", 16, 24, rng));
    m.layers.push_back({"relu", ir::ReLU{}});
    m.layers.push_back(apu::testing::fc_layer("fc2", 8, 16, rng));
    CompressOptions o;
    o.num_blocks = 4;
    o.scheme = scheme;
    o.seed = 3;
    return compress(m, o);
}

}  // namespace

TEST_CASE("compression prunes every FC layer to its block count") {
    const auto cm = small_compressed(QuantScheme::UniformSymmetric);
    REQUIRE(cm.layers.size() == 2);
    const auto& fc1 = std::get<FcStage>(cm.layers[0].op);
    CHECK(fc1.relu);
    CHECK(fc1.layer.num_blocks() == 4);
    CHECK(fc1.layer.nonzeros() == 16 * 24 / 4);
}

TEST_CASE("compressed models round-trip through the binary format") {
    for (auto scheme : {QuantScheme::UniformSymmetric, QuantScheme::NonuniformCodebook}) {
        const auto cm = small_compressed(scheme);
        const auto bytes = serialize_compressed(cm);
        const auto back = deserialize_compressed(bytes, "mem");
        CHECK(serialize_compressed(back) == bytes);
        Rng rng(1);
        const auto x = apu::testing::random_real({24}, rng, 1.0);
        CHECK(ir::reference_eval(to_network_model(cm), x, &cm.quant) ==
              ir::reference_eval(to_network_model(back), x, &back.quant));
    }
}

TEST_CASE("a corrupted byte is caught by the checksum") {
    const auto bytes = serialize_compressed(small_compressed(QuantScheme::UniformSymmetric));
    for (std::size_t pos : {bytes.size() / 2, bytes.size() - 1}) {
        auto bad = bytes;
        bad[pos] = static_cast<char>(bad[pos] ^ 0x5a);
        CHECK_THROWS_AS(deserialize_compressed(bad, "mem"), ChecksumError);
    }
    CHECK_THROWS_AS(deserialize_compressed(bytes.substr(0, 10), "mem"), InputError);
}

TEST_CASE("compression is deterministic") {
    CHECK(serialize_compressed(small_compressed(QuantScheme::NonuniformCodebook)) ==
          serialize_compressed(small_compressed(QuantScheme::NonuniformCodebook)));
}

TEST_CASE("explicit masks override generated ones") {
    Rng rng(2);
    ir::NetworkModel m;
    m.input_shape = {8};
    m.layers.push_back(apu::testing::fc_layer("fc", 8, 8, rng));
    CompressOptions o;
    o.masks.emplace("fc", BlockMask::identity(8, 8, 2));
    const auto cm = compress(m, o);
    const auto& l = std::get<FcStage>(cm.layers[0].op).layer;
    CHECK(l.num_blocks() == 2);
    CHECK(l.block_rows(0) == std::vector<std::size_t>{0, 1, 2, 3});
}

TEST_CASE("file save and load") {
    const auto cm = small_compressed(QuantScheme::UniformSymmetric);
    const auto path = std::filesystem::temp_directory_path() / "apu_test_small.apu";
    save_compressed(cm, path);
    CHECK(serialize_compressed(load_compressed(path)) == serialize_compressed(cm));
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_compressed(path), InputError);
}
