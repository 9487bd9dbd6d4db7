// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#include <cstring>

#include "apu/compress.hpp"
#include "apu/digest.hpp"
#include "apu/error.hpp"
#include "apu/json_io.hpp"

namespace apu::prune {

namespace {

constexpr char kMagic[4] = {'A', 'P', 'U', 'C'};
constexpr std::uint32_t kVersion = 1;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

void put_le(std::string& out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(const std::string& in, std::size_t pos, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    return v;
}

int elem_bytes(int bits) { return bits <= 8 ? 1 : bits <= 16 ? 2 : bits <= 32 ? 4 : 8; }

class BlobWriter {
public:
    json put(const Tensor& t) {
        json j;
        j["shape"] = t.shape();
        j["bits"] = t.bits();
        if (!t.has_data()) {
            j["offset"] = nullptr;
            return j;
        }
        if (!t.is_int()) throw InternalError("compressed tensors must be integer");
        const int eb = elem_bytes(t.bits());
        j["offset"] = payload.size();
        j["elem_bytes"] = eb;
        for (auto v : t.ints()) put_le(payload, static_cast<std::uint64_t>(v), eb);
        return j;
    }
    std::string payload;
};

Tensor get_blob(const json& j, const std::string& payload) {
    Shape shape = j.at("shape").get<Shape>();
    const int bits = j.at("bits").get<int>();
    if (j.at("offset").is_null()) return Tensor::shape_only(std::move(shape), DType::Int, bits);
    const std::size_t off = j.at("offset").get<std::size_t>();
    const int eb = j.at("elem_bytes").get<int>();
    const std::size_t n = shape_numel(shape);
    if (off + n * static_cast<std::size_t>(eb) > payload.size()) throw InputError("tensor blob runs past the payload");
    std::vector<std::int64_t> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t raw = get_le(payload, off + i * static_cast<std::size_t>(eb), eb);
        if (eb < 8 && (raw >> (8 * eb - 1)) & 1) raw |= ~std::uint64_t{0} << (8 * eb);  // sign extend
        v[i] = static_cast<std::int64_t>(raw);
    }
    return Tensor::integer(std::move(shape), std::move(v), bits);
}

json pair_json(const ir::Pair& p) { return json::array({p[0], p[1]}); }
ir::Pair pair_of(const json& j) { return {j.at(0).get<std::size_t>(), j.at(1).get<std::size_t>()}; }

}  // namespace

std::string serialize_compressed(const CompressedModel& m) {
    BlobWriter blobs;
    json h;
    h["format"] = "apu-compressed";
    h["name"] = m.name;
    h["input_shape"] = m.input_shape;
    h["shape_only"] = m.shape_only;
    h["independent_layers"] = m.independent_layers;
    h["quant"] = quant_spec_to_json(m.quant);
    json layers = json::array();
    for (const auto& l : m.layers) {
        json j;
        j["name"] = l.name;
        j["kind"] = l.kind();
        j["input_shape"] = l.input_shape;
        j["output_shape"] = l.output_shape;
        std::visit(overloaded{[&](const FcStage& st) {
                                  const auto& L = st.layer;
                                  j["relu"] = st.relu;
                                  j["num_blocks"] = L.num_blocks();
                                  j["original_shape"] = L.original_shape;
                                  j["row_perm"] = L.row_perm;
                                  j["col_perm"] = L.col_perm;
                                  j["quant"] = L.quant ? quantizer_to_json(*L.quant) : json(nullptr);
                                  json bl = json::array();
                                  for (const auto& b : L.blocks)
                                      bl.push_back({{"row_offset", b.row_offset},
                                                    {"col_offset", b.col_offset},
                                                    {"weights", blobs.put(b.weights)},
                                                    {"bias", blobs.put(b.bias)}});
                                  j["blocks"] = bl;
                              },
                              [&](const ConvStage& st) {
                                  j["relu"] = st.relu;
                                  j["stride"] = pair_json(st.conv.stride);
                                  j["padding"] = pair_json(st.conv.padding);
                                  j["groups"] = st.conv.groups;
                                  j["kernel"] = blobs.put(st.conv.kernel);
                                  j["bias"] = blobs.put(st.conv.bias);
                              },
                              [&](const PoolStage& st) {
                                  j["window"] = pair_json(st.pool.window);
                                  j["stride"] = pair_json(st.pool.stride);
                                  j["padding"] = pair_json(st.pool.padding);
                              },
                              [&](const ReluStage&) {},
                              [&](const AttentionStage& st) {
                                  j["heads"] = st.mha.heads;
                                  j["d_model"] = st.mha.d_model;
                                  j["d_k"] = st.mha.d_k;
                                  j["w_q"] = blobs.put(st.mha.w_q);
                                  j["w_k"] = blobs.put(st.mha.w_k);
                                  j["w_v"] = blobs.put(st.mha.w_v);
                                  j["w_o"] = blobs.put(st.mha.w_o);
                              }},
                   l.op);
        layers.push_back(std::move(j));
    }
    h["layers"] = std::move(layers);
    h["payload_bytes"] = blobs.payload.size();
    h["payload_sha256"] = sha256_hex(blobs.payload);

    const std::string header = h.dump();
    const std::string hdigest = sha256_hex(header);
    std::string out(kMagic, 4);
    put_le(out, kVersion, 4);
    put_le(out, header.size(), 8);
    out += hdigest;
    out += header;
    out += blobs.payload;
    return out;
}

CompressedModel deserialize_compressed(const std::string& bytes, const std::string& origin) {
    if (bytes.size() < 16 + 64 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw ChecksumError(origin + ": not an APU compressed model (bad magic or truncated)");
    const auto version = get_le(bytes, 4, 4);
    if (version != kVersion) throw InputError(origin + ": unsupported container version " + std::to_string(version));
    const std::size_t hlen = get_le(bytes, 8, 8);
    if (hlen > bytes.size() - 16 - 64) throw ChecksumError(origin + ": truncated header");
    const std::string hdigest = bytes.substr(16, 64);
    const std::string header = bytes.substr(80, hlen);
    if (sha256_hex(header) != hdigest) throw ChecksumError(origin + ": header checksum mismatch");
    const std::string payload = bytes.substr(80 + hlen);

    json h = parse_json(header, origin);
    try {
        if (payload.size() != h.at("payload_bytes").get<std::size_t>())
            throw ChecksumError(origin + ": payload is " + std::to_string(payload.size()) + " bytes, header says " +
                                std::to_string(h.at("payload_bytes").get<std::size_t>()));
        const std::string want = h.at("payload_sha256").get<std::string>();
        const std::string got = sha256_hex(payload);
        if (want != got) throw ChecksumError(origin + ": payload checksum mismatch (expected " + want + ", got " + got + ")");

        CompressedModel m;
        m.name = h.at("name").get<std::string>();
        m.input_shape = h.at("input_shape").get<Shape>();
        m.shape_only = h.at("shape_only").get<bool>();
        m.independent_layers = h.value("independent_layers", false);
        m.quant = quant_spec_from_json(h.at("quant"));
        for (const auto& j : h.at("layers")) {
            CompressedLayer l;
            l.name = j.at("name").get<std::string>();
            l.input_shape = j.at("input_shape").get<Shape>();
            l.output_shape = j.at("output_shape").get<Shape>();
            const std::string kind = j.at("kind").get<std::string>();
            if (kind == "fc") {
                FcStage st;
                st.relu = j.at("relu").get<bool>();
                st.layer.original_shape = j.at("original_shape").get<Shape>();
                st.layer.row_perm = j.at("row_perm").get<std::vector<std::size_t>>();
                st.layer.col_perm = j.at("col_perm").get<std::vector<std::size_t>>();
                if (!j.at("quant").is_null()) st.layer.quant = quantizer_from_json(j.at("quant"));
                for (const auto& b : j.at("blocks")) {
                    DenseBlock db;
                    db.row_offset = b.at("row_offset").get<std::size_t>();
                    db.col_offset = b.at("col_offset").get<std::size_t>();
                    db.weights = get_blob(b.at("weights"), payload);
                    db.bias = get_blob(b.at("bias"), payload);
                    st.layer.blocks.push_back(std::move(db));
                }
                if (st.layer.blocks.size() != j.at("num_blocks").get<std::size_t>())
                    throw InputError(origin + ": block count mismatch in layer '" + l.name + "'");
                l.op = std::move(st);
            } else if (kind == "conv") {
                ConvStage st;
                st.relu = j.at("relu").get<bool>();
                st.conv.stride = pair_of(j.at("stride"));
                st.conv.padding = pair_of(j.at("padding"));
                st.conv.groups = j.at("groups").get<std::size_t>();
                st.conv.kernel = get_blob(j.at("kernel"), payload);
                st.conv.bias = get_blob(j.at("bias"), payload);
                l.op = std::move(st);
            } else if (kind == "pool") {
                ir::MaxPool2D p;
                p.window = pair_of(j.at("window"));
                p.stride = pair_of(j.at("stride"));
                p.padding = pair_of(j.at("padding"));
                l.op = PoolStage{p};
            } else if (kind == "relu") {
                l.op = ReluStage{};
            } else if (kind == "attention") {
                AttentionStage st;
                st.mha.heads = j.at("heads").get<std::size_t>();
                st.mha.d_model = j.at("d_model").get<std::size_t>();
                st.mha.d_k = j.at("d_k").get<std::size_t>();
                st.mha.w_q = get_blob(j.at("w_q"), payload);
                st.mha.w_k = get_blob(j.at("w_k"), payload);
                st.mha.w_v = get_blob(j.at("w_v"), payload);
                st.mha.w_o = get_blob(j.at("w_o"), payload);
                l.op = std::move(st);
            } else {
                throw InputError(origin + ": unknown layer kind '" + kind + "'");
            }
            m.layers.push_back(std::move(l));
        }
        return m;
    } catch (const json::exception& e) {
        throw InputError(origin + ": malformed header: " + e.what());
    }
}

void save_compressed(const CompressedModel& model, const std::filesystem::path& path) {
    write_file(path, serialize_compressed(model));
}

CompressedModel load_compressed(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw InputError("compressed model not found: '" + path.string() + "'");
    return deserialize_compressed(read_file(path), path.string());
}

}  // namespace apu::prune
