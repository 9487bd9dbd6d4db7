// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#include "apu/costmodel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>
#include <utility>

#include "apu/error.hpp"
#include "apu/ops.hpp"
#include "apu/simulator.hpp"

namespace apu::cost {

namespace {

double log2d(double x) { return std::log2(x); }

// Widths of every adder of a pairwise tree over n products of width p.
double adder_bits(std::size_t n, int p) {
    double bits = 0;
    std::size_t level = n;
    int width = p;
    while (level > 1) {
        ++width;
        bits += static_cast<double>(level / 2) * width;
        level = (level + 1) / 2;
    }
    return bits;
}

}  // namespace

void CostParams::validate() const {
    const double v[] = {e_sram_bit, alpha,     e_sram_array, e_mul4,     mul_gamma,  e_add_bit,   e_rf_bit,
                        e_quant_bit, e_io_bit, offchip_ratio, near_memory_factor, a_sram_bit, a_mul_bit2,
                        a_add_bit, a_rf_bit, a_quant_bit, a_io_bit};
    for (double x : v)
        if (!(x > 0) || !std::isfinite(x)) throw InputError("cost coefficients must be positive and finite");
}

CostParams params_from_json(const json& j) {
    if (!j.is_object()) throw InputError("cost parameters must be a JSON object");
    CostParams p;
    const std::pair<const char*, double*> fields[] = {
        {"e_sram_bit", &p.e_sram_bit},   {"alpha", &p.alpha},
        {"e_sram_array", &p.e_sram_array}, {"e_mul4", &p.e_mul4},
        {"mul_gamma", &p.mul_gamma},     {"e_add_bit", &p.e_add_bit},
        {"e_rf_bit", &p.e_rf_bit},       {"e_quant_bit", &p.e_quant_bit},
        {"e_io_bit", &p.e_io_bit},       {"offchip_ratio", &p.offchip_ratio},
        {"near_memory_factor", &p.near_memory_factor}, {"a_sram_bit", &p.a_sram_bit},
        {"a_mul_bit2", &p.a_mul_bit2},   {"a_add_bit", &p.a_add_bit},
        {"a_rf_bit", &p.a_rf_bit},       {"a_quant_bit", &p.a_quant_bit},
        {"a_io_bit", &p.a_io_bit}};
    for (const auto& [key, value] : j.items()) {
        auto it = std::find_if(std::begin(fields), std::end(fields), [&](const auto& f) { return key == f.first; });
        if (it == std::end(fields)) throw InputError("unknown cost parameter '" + key + "'");
        if (!value.is_number()) throw InputError("cost parameter '" + key + "' must be a number");
        *it->second = value.get<double>();
    }
    p.validate();
    return p;
}

json params_to_json(const CostParams& p) {
    return json{{"e_sram_bit", p.e_sram_bit},     {"alpha", p.alpha},
                {"e_sram_array", p.e_sram_array}, {"e_mul4", p.e_mul4},
                {"mul_gamma", p.mul_gamma},       {"e_add_bit", p.e_add_bit},
                {"e_rf_bit", p.e_rf_bit},         {"e_quant_bit", p.e_quant_bit},
                {"e_io_bit", p.e_io_bit},         {"offchip_ratio", p.offchip_ratio},
                {"near_memory_factor", p.near_memory_factor}, {"a_sram_bit", p.a_sram_bit},
                {"a_mul_bit2", p.a_mul_bit2},     {"a_add_bit", p.a_add_bit},
                {"a_rf_bit", p.a_rf_bit},         {"a_quant_bit", p.a_quant_bit},
                {"a_io_bit", p.a_io_bit}};
}

double multiplier_energy(int bits, const CostParams& p) {
    const double r = bits / 4.0;
    return p.e_mul4 * r * r * (1.0 + p.mul_gamma * (r - 1.0));
}

CostReport pe_cost(std::size_t rows, std::size_t cols, int wb, PeMode mode, const CostParams& p, int ab) {
    if (rows == 0 || cols == 0) throw InputError("PE dimensions must be positive");
    if (wb < 1 || wb > 32) throw InputError("unsupported weight width " + std::to_string(wb));
    if (ab == 0) ab = wb;
    p.validate();
    CostReport r;
    r.rows = rows;
    r.cols = cols;
    r.weight_bits = wb;
    r.activation_bits = ab;
    r.mode = mode;

    const double array_bits = static_cast<double>(rows) * static_cast<double>(cols) * wb;
    const double row_bits = static_cast<double>(cols) * wb;
    const int product = wb + ab;
    const int tree_out = product + static_cast<int>(sim::adder_stages(cols));
    const double mul_bits = static_cast<double>(cols) * wb * ab;

    auto& e = r.energy;
    e.weight_sram = p.e_sram_bit * row_bits * (1.0 + p.alpha * log2d(array_bits)) + p.e_sram_array * array_bits;
    e.multipliers = static_cast<double>(cols) * multiplier_energy(std::max(wb, ab), p);
    e.adder_tree = p.e_add_bit * adder_bits(cols, product);
    e.quantizer = p.e_quant_bit * tree_out;
    e.routing = p.e_io_bit * ab;

    auto& a = r.area;
    a.weight_sram = p.a_sram_bit * array_bits;
    a.multipliers = p.a_mul_bit2 * mul_bits;
    a.adder_tree = p.a_add_bit * adder_bits(cols, product);
    a.quantizer = p.a_quant_bit * tree_out;
    a.routing = p.a_io_bit * static_cast<double>(cols) * ab;

    if (mode == PeMode::Temporal) {
        const double acc = static_cast<double>(rows) * sim::temporal_acc_bits(wb, ab, cols);
        e.register_file = p.e_rf_bit * acc;
        a.register_file = p.a_rf_bit * acc;
    }
    r.ops_per_cycle = normalized_ops_per_cycle(cols, wb, ab);
    r.energy_per_op = e.total() / static_cast<double>(r.ops_per_cycle);
    return r;
}

std::vector<CostReport> precision_sweep(std::size_t rows, std::size_t cols, const std::vector<int>& bits, PeMode mode,
                                        const CostParams& p) {
    std::vector<CostReport> out;
    for (int b : bits) {
        if (b != 4 && b != 8 && b != 16) throw InputError("unsupported bit width " + std::to_string(b) + " (supported: 4, 8, 16)");
        out.push_back(pe_cost(rows, cols, b, mode, p, b));
    }
    return out;
}

std::uint64_t interconnect_memory(Interconnect kind, std::size_t n, std::size_t L) {
    const auto N = static_cast<std::uint64_t>(n);
    switch (kind) {
        case Interconnect::Mux: return N * L * sched::select_width(n);
        case Interconnect::Crossbar: return N * N * L;
        case Interconnect::Clos:
            return static_cast<std::uint64_t>(std::llround(6.0 * std::pow(static_cast<double>(n), 1.5))) * L;
    }
    return 0;
}

Throughput throughput(const AcceleratorConfig& cfg, const sim::SimReport* report, double watts) {
    if (!(watts > 0)) throw InputError("calibration wattage must be positive");
    Throughput t;
    t.ops_per_pe_cycle = normalized_ops_per_cycle(cfg.pe_cols, cfg.weight_bits, cfg.activation_bits);
    t.peak_tops = static_cast<double>(t.ops_per_pe_cycle) * cfg.clock_hz * static_cast<double>(cfg.num_pes) * 1e-12;
    t.effective_tops = report ? t.peak_tops * report->compute_utilization : t.peak_tops;
    t.tops_per_watt = t.effective_tops / watts;
    return t;
}

json cost_to_json(const CostReport& r) {
    auto bd = [](const Breakdown& b) {
        return json{{"weight_sram", b.weight_sram}, {"multipliers", b.multipliers}, {"adder_tree", b.adder_tree},
                    {"register_file", b.register_file}, {"quantizer", b.quantizer}, {"routing", b.routing},
                    {"memory", b.memory()}, {"compute", b.compute()}, {"total", b.total()}};
    };
    json j{{"rows", r.rows}, {"cols", r.cols}, {"weight_bits", r.weight_bits}, {"activation_bits", r.activation_bits},
           {"mode", to_string(r.mode)}, {"energy_per_cycle", bd(r.energy)}, {"area", bd(r.area)},
           {"ops_per_cycle", r.ops_per_cycle}, {"energy_per_op", r.energy_per_op}};
    j["memory_share"] = r.energy.memory() / r.energy.total();
    j["compute_share"] = r.energy.compute() / r.energy.total();
    return j;
}

SweepSpec sweep_from_json(const json& j) {
    SweepSpec s;
    if (j.contains("block_sizes")) s.block_sizes = j.at("block_sizes").get<std::vector<std::size_t>>();
    if (j.contains("bits")) s.bits = j.at("bits").get<std::vector<int>>();
    if (j.contains("interconnects")) {
        s.interconnects.clear();
        for (const auto& k : j.at("interconnects")) s.interconnects.push_back(parse_interconnect(k.get<std::string>()));
    }
    if (j.contains("modes")) {
        s.modes.clear();
        for (const auto& m : j.at("modes")) s.modes.push_back(parse_pe_mode(m.get<std::string>()));
    }
    if (j.contains("num_pes")) s.num_pes = j.at("num_pes").get<std::size_t>();
    if (j.contains("params")) s.params = params_from_json(j.at("params"));
    for (auto b : s.block_sizes)
        if (b == 0) throw InputError("sweep block sizes must be positive");
    for (int b : s.bits)
        if (b < 2 || b > 16) throw InputError("sweep bit width " + std::to_string(b) + " outside [2, 16]");
    if (s.num_pes == 0) throw InputError("sweep num_pes must be positive");
    return s;
}

SweepSpec load_sweep(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw InputError("sweep spec not found: '" + path.string() + "'");
    try {
        return sweep_from_json(load_json(path));
    } catch (const json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

void run_sweep(const SweepSpec& spec, std::ostream& csv, std::size_t jobs) {
    struct Point {
        std::size_t block;
        int bits;
        PeMode mode;
        Interconnect ic;
    };
    std::vector<Point> pts;
    for (auto b : spec.block_sizes)
        for (int bits : spec.bits)
            for (auto m : spec.modes)
                for (auto ic : spec.interconnects) pts.push_back({b, bits, m, ic});

    std::vector<std::string> rows(pts.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < pts.size(); i = next++) {
            const auto& pt = pts[i];
            const CostReport r = pe_cost(pt.block, pt.block, pt.bits, pt.mode, spec.params, pt.bits);
            const std::size_t routed = spec.num_pes * pt.block;
            std::ostringstream os;
            os << std::setprecision(10) << pt.block << "," << pt.bits << "," << to_string(pt.mode) << ","
               << to_string(pt.ic) << "," << r.energy.weight_sram << "," << r.energy.multipliers << ","
               << r.energy.adder_tree << "," << r.energy.register_file << "," << r.energy.quantizer << ","
               << r.energy.routing << "," << r.energy.memory() << "," << r.energy.compute() << "," << r.energy.total()
               << "," << r.area.memory() << "," << r.area.compute() << "," << r.area.total() << "," << r.ops_per_cycle
               << "," << routed << "," << interconnect_memory(pt.ic, routed, 1) << "\n";
            rows[i] = os.str();
        }
    };
    jobs = std::max<std::size_t>(1, std::min(jobs, pts.size()));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < jobs; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();

    csv << "block,bits,mode,interconnect,e_weight_sram,e_multipliers,e_adder_tree,e_register_file,e_quantizer,"
           "e_routing,e_memory,e_compute,e_total,area_memory,area_compute,area_total,ops_per_cycle,"
           "routed_activations,interconnect_bits\n";
    for (const auto& r : rows) csv << r;
}

}  // namespace apu::cost
