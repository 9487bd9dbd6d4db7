// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#include "apu/config.hpp"

#include "apu/digest.hpp"
#include "apu/error.hpp"

namespace apu {

std::string to_string(PeMode m) { return m == PeMode::Spatial ? "spatial" : "temporal"; }

PeMode parse_pe_mode(const std::string& s) {
    if (s == "spatial") return PeMode::Spatial;
    if (s == "temporal") return PeMode::Temporal;
    throw InputError("unknown PE mode '" + s + "' (expected spatial or temporal)");
}

std::string to_string(Interconnect k) {
    switch (k) {
        case Interconnect::Mux: return "mux";
        case Interconnect::Clos: return "clos";
        case Interconnect::Crossbar: return "crossbar";
    }
    return "?";
}

Interconnect parse_interconnect(const std::string& s) {
    if (s == "mux") return Interconnect::Mux;
    if (s == "clos") return Interconnect::Clos;
    if (s == "crossbar") return Interconnect::Crossbar;
    throw InputError("unknown interconnect '" + s + "' (expected mux, clos or crossbar)");
}

std::string to_string(HostOpKind k) {
    switch (k) {
        case HostOpKind::Compare: return "compare";
        case HostOpKind::Add: return "add";
        case HostOpKind::Activation: return "activation";
        case HostOpKind::Relu: return "relu";
        case HostOpKind::Softmax: return "softmax";
    }
    return "?";
}

std::size_t AcceleratorConfig::host_cycles(HostOpKind kind, std::size_t count) const {
    auto it = host_op_cycles.find(kind);
    return count * (it == host_op_cycles.end() ? 1 : it->second);
}

void AcceleratorConfig::validate() const {
    if (!num_pes || !pe_rows || !pe_cols) throw InputError("config: num_pes, pe_rows and pe_cols must be positive");
    if (num_pes >= 0xFFFF) throw InputError("config: at most 65534 PEs");
    if (weight_bits != 4 && weight_bits != 8 && weight_bits != 16)
        throw InputError("config: weight_bits must be 4, 8 or 16");
    if (activation_bits < 2 || activation_bits > 16) throw InputError("config: activation_bits must be in [2,16]");
    if (!(clock_hz > 0.0)) throw InputError("config: clock_hz must be positive");
    if (!(watts > 0.0)) throw InputError("config: watts must be positive");
}

AcceleratorConfig config_from_json(const json& j) {
    AcceleratorConfig c;
    try {
        c.num_pes = j.value("num_pes", c.num_pes);
        c.pe_rows = j.value("pe_rows", c.pe_rows);
        c.pe_cols = j.value("pe_cols", c.pe_cols);
        c.weight_bits = j.value("weight_bits", c.weight_bits);
        c.activation_bits = j.value("activation_bits", c.activation_bits);
        c.clock_hz = j.value("clock_hz", c.clock_hz);
        if (j.contains("interconnect")) c.interconnect = parse_interconnect(j.at("interconnect").get<std::string>());
        c.reload_cycles_per_row = j.value("reload_cycles_per_row", c.reload_cycles_per_row);
        c.overlap_routing = j.value("overlap_routing", c.overlap_routing);
        c.watts = j.value("watts", c.watts);
        if (j.contains("host_op_cycles")) {
            for (const auto& [k, v] : j.at("host_op_cycles").items()) {
                bool found = false;
                for (auto kind : {HostOpKind::Compare, HostOpKind::Add, HostOpKind::Activation, HostOpKind::Relu,
                                  HostOpKind::Softmax})
                    if (to_string(kind) == k) {
                        c.host_op_cycles[kind] = v.get<std::size_t>();
                        found = true;
                    }
                if (!found) throw InputError("config: unknown host op '" + k + "'");
            }
        }
    } catch (const json::exception& e) {
        throw InputError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

json config_to_json(const AcceleratorConfig& c) {
    json j;
    j["num_pes"] = c.num_pes;
    j["pe_rows"] = c.pe_rows;
    j["pe_cols"] = c.pe_cols;
    j["weight_bits"] = c.weight_bits;
    j["activation_bits"] = c.activation_bits;
    j["clock_hz"] = c.clock_hz;
    json h;
    for (const auto& [k, v] : c.host_op_cycles) h[to_string(k)] = v;
    j["host_op_cycles"] = h;
    j["interconnect"] = to_string(c.interconnect);
    j["reload_cycles_per_row"] = c.reload_cycles_per_row;
    j["overlap_routing"] = c.overlap_routing;
    j["watts"] = c.watts;
    return j;
}

AcceleratorConfig load_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw InputError("config file not found: '" + path.string() + "'");
    return config_from_json(load_json(path));
}

std::string config_hash(const AcceleratorConfig& c) { return sha256_hex(config_to_json(c).dump()); }

}  // namespace apu
