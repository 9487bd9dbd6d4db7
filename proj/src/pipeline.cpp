// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#include "apu/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "apu/digest.hpp"
#include "apu/error.hpp"
#include "apu/log.hpp"
#include "apu/manifest.hpp"
#include "apu/rng.hpp"

namespace apu {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

template <class F>
auto stage(const std::string& name, F&& f) {
    log::debug("stage ", name);
    try {
        return f();
    } catch (const InternalError& e) {
        throw InternalError(name + ": " + e.what());
    } catch (const InputError& e) {
        throw InputError(name + ": " + e.what());
    } catch (const Error& e) {
        throw InputError(name + ": " + e.what());
    }
}

struct MacCount {
    std::uint64_t dense = 0, nonzero = 0;
};

MacCount layer_macs(const prune::CompressedLayer& l) {
    return std::visit(overloaded{[](const prune::FcStage& s) {
                                     return MacCount{static_cast<std::uint64_t>(s.layer.original_shape[0]) * s.layer.original_shape[1],
                                                     static_cast<std::uint64_t>(s.layer.nonzeros())};
                                 },
                                 [&](const prune::ConvStage& s) {
                                     const auto& c = s.conv;
                                     const std::uint64_t P = l.output_shape[1] * l.output_shape[2];
                                     const std::uint64_t k = c.kh() * c.kw() * P * c.out_channels();
                                     return MacCount{k * c.in_channels(), k * c.kernel.dim(1)};
                                 },
                                 [&](const prune::AttentionStage& s) {
                                     const auto& m = s.mha;
                                     const std::uint64_t S = l.input_shape[0];
                                     const std::uint64_t n = S * m.heads * (3 * m.d_k * m.d_model + 2 * S * m.d_k + m.d_model * m.d_k);
                                     return MacCount{n, n};
                                 },
                                 [](const auto&) { return MacCount{}; }},
                      l.op);
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

}  // namespace

prune::CompressedModel load_any_model(const std::filesystem::path& path, const AcceleratorConfig& cfg,
                                      const prune::CompressOptions& opts) {
    if (!std::filesystem::exists(path)) throw InputError("model file not found: '" + path.string() + "'");
    if (path.extension() == ".apu") return prune::load_compressed(path);
    const std::string text = read_file(path);
    const json j = parse_json(text, path.string());
    if (is_layer_manifest(j)) return manifest_from_json(j, cfg, opts.seed, path.string());
    return prune::compress(ir::parse_model(text, path.string()), opts);
}

void BaselineSpec::validate() const {
    if (kind != "dense-sequential" && kind != "unstructured-sparse" && kind != "apu")
        throw InputError("unknown baseline '" + kind + "' (supported: dense-sequential, unstructured-sparse, apu)");
    if (!(penalty >= 1.0)) throw InputError("baseline penalty must be >= 1");
    if (macs_per_cycle < 0) throw InputError("baseline MACs per cycle must be positive");
    if (pointer_bits < 0) throw InputError("pointer bits must be non-negative");
}

double BaselineSpec::effective_macs_per_cycle(const AcceleratorConfig& cfg) const {
    if (macs_per_cycle > 0) return macs_per_cycle;
    // Dense: an array with the same multipliers. Sparse: one MAC lane per PE.
    if (kind == "dense-sequential") return static_cast<double>(cfg.num_pes * cfg.pe_cols);
    return static_cast<double>(cfg.num_pes);
}

namespace {

double baseline_cycles(const BaselineSpec& b, const AcceleratorConfig& cfg, const MacCount& m, std::size_t apu_cycles) {
    if (b.kind == "apu" || (m.dense == 0 && m.nonzero == 0)) return static_cast<double>(apu_cycles);
    const double mpc = b.effective_macs_per_cycle(cfg);
    if (b.kind == "dense-sequential") return static_cast<double>(m.dense) / mpc;
    return static_cast<double>(m.nonzero) * b.penalty / mpc;
}

}  // namespace

Comparison compare(const prune::CompressedModel& model, const AcceleratorConfig& cfg, const BaselineSpec& baseline) {
    baseline.validate();
    Comparison out;
    out.baseline = baseline;
    const auto prog = mapper::map_model(model, cfg, {.materialize_routes = false});
    const auto rep = sim::simulate_timing(prog);
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const auto& l = model.layers[i];
        const auto& t = rep.layers[i];
        LayerComparison lc;
        lc.name = l.name;
        lc.kind = l.kind();
        lc.folds = t.folds;
        const MacCount m = layer_macs(l);
        lc.dense_macs = m.dense;
        lc.nonzero_macs = m.nonzero;
        lc.apu_cycles = t.cycles;
        lc.baseline_cycles = baseline_cycles(baseline, cfg, m, t.cycles);
        lc.speedup = t.cycles ? lc.baseline_cycles / static_cast<double>(t.cycles) : 1.0;
        lc.apu_storage_bits = m.nonzero && lc.kind == "fc" ? m.nonzero * static_cast<std::uint64_t>(cfg.weight_bits) : 0;
        lc.baseline_storage_bits = lc.apu_storage_bits ? m.nonzero * static_cast<std::uint64_t>(cfg.weight_bits + baseline.pointer_bits) : 0;
        if (const auto* fc = std::get_if<prune::FcStage>(&l.op); fc && t.folds > 1 && baseline.kind != "apu") {
            // Remap with one PE per block; the baseline scales with the PE count.
            AcceleratorConfig wide = cfg;
            wide.num_pes = fc->layer.num_blocks();
            prune::CompressedModel single;
            single.name = model.name;
            single.input_shape = l.input_shape;
            single.layers = {l};
            single.quant = model.quant;
            single.shape_only = model.shape_only;
            single.independent_layers = true;
            const auto wrep = sim::simulate_timing(mapper::map_model(single, wide, {.materialize_routes = false}));
            BaselineSpec wb = baseline;
            if (wb.macs_per_cycle > 0) wb.macs_per_cycle *= static_cast<double>(wide.num_pes) / static_cast<double>(cfg.num_pes);
            lc.unfolded_speedup = baseline_cycles(wb, wide, m, wrep.total_cycles) / static_cast<double>(wrep.total_cycles);
        }
        out.apu_cycles += lc.apu_cycles;
        out.baseline_cycles += lc.baseline_cycles;
        out.layers.push_back(std::move(lc));
    }
    out.speedup = out.apu_cycles ? out.baseline_cycles / static_cast<double>(out.apu_cycles) : 1.0;
    return out;
}

json comparison_to_json(const Comparison& c) {
    json j;
    j["baseline"] = {{"kind", c.baseline.kind},
                     {"macs_per_cycle", c.baseline.macs_per_cycle},
                     {"penalty", c.baseline.penalty},
                     {"pointer_bits", c.baseline.pointer_bits}};
    json layers = json::array();
    for (const auto& l : c.layers) {
        json lj{{"name", l.name},
                {"kind", l.kind},
                {"folds", l.folds},
                {"dense_macs", l.dense_macs},
                {"nonzero_macs", l.nonzero_macs},
                {"apu_cycles", l.apu_cycles},
                {"baseline_cycles", l.baseline_cycles},
                {"speedup", l.speedup}};
        lj["unfolded_speedup"] = l.unfolded_speedup ? json(*l.unfolded_speedup) : json(nullptr);
        lj["apu_storage_bits"] = l.apu_storage_bits;
        lj["baseline_storage_bits"] = l.baseline_storage_bits;
        layers.push_back(std::move(lj));
    }
    j["layers"] = std::move(layers);
    j["total"] = {{"apu_cycles", c.apu_cycles}, {"baseline_cycles", c.baseline_cycles}, {"speedup", c.speedup}};
    return j;
}

std::string comparison_to_csv(const Comparison& c) {
    std::ostringstream os;
    os << "layer,kind,folds,dense_macs,nonzero_macs,apu_cycles,baseline_cycles,speedup,unfolded_speedup\n";
    for (const auto& l : c.layers)
        os << l.name << "," << l.kind << "," << l.folds << "," << l.dense_macs << "," << l.nonzero_macs << ","
           << l.apu_cycles << "," << fmt(l.baseline_cycles) << "," << fmt(l.speedup) << ","
           << (l.unfolded_speedup ? fmt(*l.unfolded_speedup) : "") << "\n";
    os << "total,,," << "," << "," << c.apu_cycles << "," << fmt(c.baseline_cycles) << "," << fmt(c.speedup) << ",\n";
    return os.str();
}

void write_program_schedules_csv(std::ostream& os, const mapper::MappedProgram& p) {
    os << "layer,fold,cycle,source,dest,activation_index\n";
    for (const auto& l : p.layers)
        for (const auto& ph : l.phases)
            if (const auto* r = std::get_if<mapper::RouteIn>(&ph); r && r->schedule)
                for (std::size_t c = 0; c < r->schedule->length(); ++c)
                    for (const auto& t : r->schedule->cycles[c])
                        os << l.name << "," << r->fold << "," << c << "," << t.source << "," << t.dest << "," << t.activation << "\n";
}

std::uint64_t program_select_bits(const mapper::MappedProgram& p) {
    std::uint64_t bits = 0;
    const unsigned w = sched::select_width(p.config.num_pes);
    for (const auto& l : p.layers)
        for (const auto& ph : l.phases)
            if (const auto* r = std::get_if<mapper::RouteIn>(&ph)) bits += static_cast<std::uint64_t>(p.config.num_pes) * r->cycles * w;
    return bits;
}

json cost_report_json(const AcceleratorConfig& cfg, const sim::SimReport* report, PeMode mode,
                      const cost::CostParams& params, std::uint64_t select_bits, std::size_t route_cycles) {
    json j;
    j["params"] = cost::params_to_json(params);
    const auto pe = cost::pe_cost(cfg.pe_rows, cfg.pe_cols, cfg.weight_bits, mode, params, cfg.activation_bits);
    j["pe"] = cost::cost_to_json(pe);
    const auto t = cost::throughput(cfg, report, cfg.watts);
    j["throughput"] = {{"ops_per_pe_cycle", t.ops_per_pe_cycle},
                       {"num_pes", cfg.num_pes},
                       {"clock_hz", cfg.clock_hz},
                       {"peak_tops", t.peak_tops},
                       {"effective_tops", t.effective_tops},
                       {"watts", cfg.watts},
                       {"tops_per_watt", t.tops_per_watt}};
    if (report) {
        j["run"] = {{"total_cycles", report->total_cycles},
                    {"normalized_ops", report->normalized_ops},
                    {"energy", pe.energy.total() * static_cast<double>(report->total_cycles) * report->utilization *
                                   static_cast<double>(cfg.num_pes)}};
    }
    json ic;
    ic["configured"] = to_string(cfg.interconnect);
    ic["select_bits"] = select_bits;
    ic["route_cycles"] = route_cycles;
    for (auto k : {Interconnect::Mux, Interconnect::Clos, Interconnect::Crossbar})
        ic[to_string(k) + "_bits"] = cost::interconnect_memory(k, cfg.num_pes, route_cycles);
    j["interconnect"] = std::move(ic);
    return j;
}

json run_pipeline(const PipelineOptions& o) {
    const AcceleratorConfig cfg = stage("config", [&] { return load_config(o.config); });
    const auto model = stage("compress", [&] { return load_any_model(o.model, cfg, o.compress); });
    std::filesystem::create_directories(o.out_dir);
    const auto apu_path = o.out_dir / "model.apu";
    stage("compress", [&] {
        if (!model.shape_only) prune::save_compressed(model, apu_path);
        return 0;
    });
    const auto prog = stage("map", [&] { return mapper::map_model(model, cfg); });

    json outputs = json::object();
    auto emit = [&](const std::string& name, const std::string& bytes) {
        write_file(o.out_dir / name, bytes);
        outputs[name] = sha256_hex(bytes);
    };
    if (!model.shape_only) outputs["model.apu"] = sha256_file(apu_path);
    emit("program.txt", mapper::dump_program(prog));
    stage("schedule", [&] {
        std::ostringstream os;
        write_program_schedules_csv(os, prog);
        emit("schedule.csv", os.str());
        return 0;
    });

    std::ostringstream trace;
    sim::SimOptions so{o.mode, o.trace ? &trace : nullptr};
    const std::uint64_t input_seed = derive_seed(o.compress.seed, "input");
    std::optional<Tensor> input;
    const auto rep = stage("simulate", [&] {
        if (model.shape_only) return sim::simulate_timing(prog, so);
        if (o.input) {
            input = tensor_from_json(load_json(*o.input), o.input->string());
        } else {
            Rng rng(input_seed);
            std::vector<double> v(shape_numel(model.input_shape));
            for (auto& x : v) x = rng.uniform(-1.0, 1.0);
            input = Tensor::real(model.input_shape, std::move(v));
        }
        auto r = sim::simulate(prog, *input, so);
        const Tensor ref = ir::reference_eval(prune::to_network_model(model), *input, &model.quant);
        const auto got = r.output->ints();
        const auto want = ref.ints();
        for (std::size_t i = 0; i < want.size(); ++i)
            if (got[i] != want[i])
                throw InternalError("oracle mismatch at output " + std::to_string(i) + ": simulator " + std::to_string(got[i]) +
                                    ", reference " + std::to_string(want[i]));
        return r;
    });
    emit("sim_report.json", dump_json(sim::report_to_json(rep)));
    if (o.trace) emit("sim_trace.csv", trace.str());
    const auto route_cycles = rep.phase_cycles.count("route") ? rep.phase_cycles.at("route") : 0;
    emit("cost_report.json",
         dump_json(stage("cost", [&] {
             return cost_report_json(cfg, &rep, o.mode, cost::CostParams{}, program_select_bits(prog), route_cycles);
         })));

    json m;
    m["tool"] = "apu";
    m["version"] = kToolVersion;
    m["config_hash"] = config_hash(cfg);
    m["mode"] = to_string(o.mode);
    m["seeds"] = {{"seed", o.compress.seed},
                  {"calibration", derive_seed(o.compress.seed, "calibration")},
                  {"input", input_seed}};
    m["inputs"] = {{"model", {{"path", o.model.filename().string()}, {"sha256", sha256_file(o.model)}}},
                   {"config", {{"path", o.config.filename().string()}, {"sha256", sha256_file(o.config)}}}};
    if (o.input) m["inputs"]["input"] = {{"path", o.input->filename().string()}, {"sha256", sha256_file(*o.input)}};
    m["compress"] = {{"num_blocks", o.compress.num_blocks},
                     {"weight_bits", o.compress.weight_bits},
                     {"activation_bits", o.compress.activation_bits},
                     {"scheme", to_string(o.compress.scheme)}};
    m["oracle"] = model.shape_only ? "skipped (shape-only)" : "match";
    m["outputs"] = outputs;
    write_file(o.out_dir / "manifest.json", dump_json(m));
    return m;
}

}  // namespace apu
