// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "apu/costmodel.hpp"
#include "apu/digest.hpp"
#include "apu/error.hpp"
#include "apu/log.hpp"
#include "apu/mapper.hpp"
#include "apu/pipeline.hpp"
#include "apu/rng.hpp"
#include "apu/scheduler.hpp"
#include "apu/simulator.hpp"

using namespace apu;

namespace {

void out_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-")
        std::cout << text;
    else
        write_file(path, text);
}

sched::RoutingDemand read_demand_csv(const std::string& path, std::size_t ns, std::size_t nd) {
    if (!std::filesystem::exists(path)) throw InputError("demand file not found: '" + path + "'");
    std::istringstream is(read_file(path));
    sched::RoutingDemand d;
    std::string line;
    std::size_t lineno = 0, max_s = 0, max_d = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (lineno == 1 && line.find_first_not_of("0123456789, \r") != std::string::npos) continue;  // header
        std::istringstream ls(line);
        std::string a, b, c;
        if (!std::getline(ls, a, ',') || !std::getline(ls, b, ',') || !std::getline(ls, c, ','))
            throw ParseError(path + ": expected source,dest,activation", lineno, 1);
        try {
            sched::Transfer t{static_cast<std::uint32_t>(std::stoul(a)), static_cast<std::uint32_t>(std::stoul(b)), std::stoull(c)};
            max_s = std::max<std::size_t>(max_s, t.source + 1);
            max_d = std::max<std::size_t>(max_d, t.dest + 1);
            d.triples.push_back(t);
        } catch (const std::logic_error&) {
            throw ParseError(path + ": bad number", lineno, 1);
        }
    }
    d.num_sources = ns ? ns : max_s;
    d.num_dests = nd ? nd : max_d;
    d.validate();
    return d;
}

struct Common {
    std::string config;
    std::uint64_t seed = 0;
    std::size_t blocks = 10;
    int bits = 4;
    int act_bits = 0;
    std::string scheme = "uniform";
    std::vector<std::string> layer_blocks;

    prune::CompressOptions compress() const {
        prune::CompressOptions o;
        o.seed = seed;
        o.num_blocks = blocks;
        o.weight_bits = bits;
        o.activation_bits = act_bits ? act_bits : bits;
        o.scheme = parse_quant_scheme(scheme);
        for (const auto& lb : layer_blocks) {
            const auto eq = lb.find('=');
            if (eq == std::string::npos) throw InputError("--layer-blocks expects name=count, got '" + lb + "'");
            o.layer_blocks[lb.substr(0, eq)] = std::stoul(lb.substr(eq + 1));
        }
        return o;
    }
    AcceleratorConfig load_cfg() const { return config.empty() ? AcceleratorConfig{} : load_config(config); }
};

void add_compress_flags(CLI::App* c, Common& o) {
    c->add_option("--blocks", o.blocks, "block count per FC layer")->check(CLI::PositiveNumber);
    c->add_option("--layer-blocks", o.layer_blocks, "per-layer block count, name=count");
    c->add_option("--bits", o.bits, "weight bits (4, 8, 16)");
    c->add_option("--act-bits", o.act_bits, "activation bits (default: weight bits)");
    c->add_option("--scheme", o.scheme, "uniform or nonuniform");
    c->add_option("--seed", o.seed, "seed for masks, calibration, codebooks and inputs");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"apu: structured-sparse accelerator compiler and simulator"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);
    Common o;
    std::string format = "json";

    // compress
    auto* c_comp = app.add_subcommand("compress", "prune and quantize a model into a .apu container");
    std::string model, out;
    c_comp->add_option("--model", model, "model JSON")->required();
    c_comp->add_option("--out", out, "output .apu path")->required();
    add_compress_flags(c_comp, o);

    // schedule
    auto* c_sched = app.add_subcommand("schedule", "build routing schedules and select tables");
    std::string demand, select_out;
    std::size_t ns = 0, nd = 0;
    c_sched->add_option("--model", model, "model (.apu, manifest or JSON)");
    c_sched->add_option("--config", o.config, "accelerator config");
    c_sched->add_option("--demand", demand, "demand CSV: source,dest,activation");
    c_sched->add_option("--sources", ns, "source count (default: from demand)");
    c_sched->add_option("--dests", nd, "destination count (default: from demand)");
    c_sched->add_option("--out", out, "schedule CSV (default stdout)");
    c_sched->add_option("--select", select_out, "write the select table (binary)");
    c_sched->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    add_compress_flags(c_sched, o);

    // map
    auto* c_map = app.add_subcommand("map", "lower a model onto the PE array");
    bool dump = false;
    c_map->add_option("--model", model, "model (.apu, manifest or JSON)")->required();
    c_map->add_option("--config", o.config, "accelerator config");
    c_map->add_flag("--dump-program", dump, "print the phase listing");
    c_map->add_option("--out", out, "output path (default stdout)");
    add_compress_flags(c_map, o);

    // simulate
    auto* c_sim = app.add_subcommand("simulate", "run a model on the simulator");
    std::string input, mode = "spatial", report, trace, output;
    bool timing_only = false;
    c_sim->add_option("--program,--model", model, "model (.apu, manifest or JSON); mapped with --config")->required();
    c_sim->add_option("--config", o.config, "accelerator config");
    c_sim->add_option("--input", input, "input tensor JSON (default: seeded uniform [-1, 1))");
    c_sim->add_option("--mode", mode, "spatial or temporal")->check(CLI::IsMember({"spatial", "temporal"}));
    c_sim->add_option("--report", report, "SimReport JSON (default stdout)");
    c_sim->add_option("--trace", trace, "trace CSV");
    c_sim->add_flag("--timing-only", timing_only, "cycle counts only, no data");
    add_compress_flags(c_sim, o);

    // cost
    auto* c_cost = app.add_subcommand("cost", "PE energy/area and throughput");
    std::size_t rows = 0, cols = 0;
    std::string params_path;
    c_cost->add_option("--config", o.config, "accelerator config");
    c_cost->add_option("--rows", rows, "block rows (default: PE rows)");
    c_cost->add_option("--cols", cols, "block cols (default: PE cols)");
    c_cost->add_option("--mode", mode, "spatial or temporal")->check(CLI::IsMember({"spatial", "temporal"}));
    c_cost->add_option("--params", params_path, "cost coefficient JSON");
    c_cost->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    c_cost->add_option("--out", out, "output path (default stdout)");

    // sweep
    auto* c_sweep = app.add_subcommand("sweep", "design-space sweep to CSV");
    std::string spec;
    std::size_t jobs = 1;
    c_sweep->add_option("--spec", spec, "sweep spec JSON")->required();
    c_sweep->add_option("--out", out, "CSV path (default stdout)");
    c_sweep->add_option("--jobs", jobs, "concurrent design points")->check(CLI::PositiveNumber);

    // compare
    auto* c_cmp = app.add_subcommand("compare", "per-layer speedup against a baseline model");
    BaselineSpec base;
    c_cmp->add_option("--model", model, "model (.apu, manifest or JSON)")->required();
    c_cmp->add_option("--config", o.config, "accelerator config");
    c_cmp->add_option("--baseline", base.kind, "dense-sequential, unstructured-sparse or apu");
    c_cmp->add_option("--macs-per-cycle", base.macs_per_cycle, "baseline MACs per cycle");
    c_cmp->add_option("--penalty", base.penalty, "random-access penalty per nonzero MAC");
    c_cmp->add_option("--pointer-bits", base.pointer_bits, "index bits per stored nonzero");
    c_cmp->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    c_cmp->add_option("--out", out, "output path (default stdout)");
    add_compress_flags(c_cmp, o);

    // pipeline
    auto* c_pipe = app.add_subcommand("pipeline", "compress, schedule, map, simulate and cost in one run");
    std::string out_dir;
    bool want_trace = false;
    c_pipe->add_option("--model", model, "model (.apu, manifest or JSON)")->required();
    c_pipe->add_option("--config", o.config, "accelerator config")->required();
    c_pipe->add_option("--out-dir", out_dir, "artifact directory")->required();
    c_pipe->add_option("--input", input, "input tensor JSON");
    c_pipe->add_option("--mode", mode, "spatial or temporal")->check(CLI::IsMember({"spatial", "temporal"}));
    c_pipe->add_flag("--trace", want_trace, "also write sim_trace.csv");
    add_compress_flags(c_pipe, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*c_comp) {
            const auto cm = prune::compress(ir::load_model(model), o.compress());
            prune::save_compressed(cm, out);
            log::info("wrote ", out);
        } else if (*c_sched) {
            if (!demand.empty()) {
                const auto d = read_demand_csv(demand, ns, nd);
                const auto s = sched::build_schedule(d);
                if (auto v = sched::verify_schedule(d, s)) throw InternalError("schedule invalid at cycle " + std::to_string(v->cycle) + ": " + v->message);
                const auto t = sched::emit_selects(s, d.num_sources, d.num_dests);
                if (!select_out.empty()) {
                    std::ofstream os(select_out, std::ios::binary);
                    if (!os) throw InputError("cannot write '" + select_out + "'");
                    sched::write_select_table(os, t);
                }
                if (format == "csv") {
                    std::ostringstream os;
                    sched::write_schedule_csv(os, s);
                    out_text(out, os.str());
                } else {
                    json j{{"length", s.length()}, {"lower_bound", sched::lower_bound(d)}, {"transfers", s.transfers()},
                           {"select_width", t.width}, {"select_bits", t.storage_bits()}, {"idle_slots", t.idle_slots()}};
                    out_text(out, dump_json(j));
                }
            } else {
                if (model.empty()) throw InputError("schedule needs --model or --demand");
                const auto cfg = o.load_cfg();
                const auto prog = mapper::map_model(load_any_model(model, cfg, o.compress()), cfg);
                if (format == "csv") {
                    std::ostringstream os;
                    write_program_schedules_csv(os, prog);
                    out_text(out, os.str());
                } else {
                    json routes = json::array();
                    for (const auto& l : prog.layers)
                        for (const auto& ph : l.phases)
                            if (const auto* r = std::get_if<mapper::RouteIn>(&ph))
                                routes.push_back({{"layer", l.name}, {"fold", r->fold}, {"cycles", r->cycles}, {"transfers", r->transfers}});
                    out_text(out, dump_json(json{{"routes", routes}, {"select_bits", program_select_bits(prog)}}));
                }
            }
        } else if (*c_map) {
            const auto cfg = o.load_cfg();
            const auto cm = load_any_model(model, cfg, o.compress());
            const auto prog = mapper::map_model(cm, cfg, {.materialize_routes = !cm.shape_only});
            if (dump) {
                out_text(out, mapper::dump_program(prog));
            } else {
                json layers = json::array();
                for (const auto& l : prog.layers) {
                    json lj{{"name", l.name}, {"kind", l.kind}, {"folds", l.folds}, {"phases", l.phases.size()}};
                    if (const auto* mm = std::get_if<mapper::MatmulPlan>(&l.op)) {
                        lj["blocks"] = mm->blocks.size();
                        if (mm->conv_case != mapper::ConvCase::None) lj["conv_case"] = mapper::to_string(mm->conv_case);
                    }
                    layers.push_back(std::move(lj));
                }
                out_text(out, dump_json(json{{"program", prog.name}, {"layers", layers}}));
            }
        } else if (*c_sim) {
            const auto cfg = o.load_cfg();
            const auto cm = load_any_model(model, cfg, o.compress());
            const bool timing = timing_only || cm.shape_only;
            const auto prog = mapper::map_model(cm, cfg, {.materialize_routes = !timing});
            std::ofstream tr;
            if (!trace.empty()) {
                tr.open(trace);
                if (!tr) throw InputError("cannot write '" + trace + "'");
            }
            sim::SimOptions so{parse_pe_mode(mode), trace.empty() ? nullptr : &tr};
            sim::SimReport r;
            if (timing) {
                r = sim::simulate_timing(prog, so);
            } else {
                Tensor x = input.empty() ? Tensor{} : tensor_from_json(load_json(input), input);
                if (input.empty()) {
                    Rng rng(derive_seed(o.seed, "input"));
                    std::vector<double> v(shape_numel(cm.input_shape));
                    for (auto& e : v) e = rng.uniform(-1.0, 1.0);
                    x = Tensor::real(cm.input_shape, std::move(v));
                }
                r = sim::simulate(prog, x, so);
            }
            out_text(report, dump_json(sim::report_to_json(r)));
        } else if (*c_cost) {
            const auto cfg = o.load_cfg();
            const auto params = params_path.empty() ? cost::CostParams{} : cost::params_from_json(load_json(params_path));
            const auto m = parse_pe_mode(mode);
            const auto r = cost::pe_cost(rows ? rows : cfg.pe_rows, cols ? cols : cfg.pe_cols, cfg.weight_bits, m, params, cfg.activation_bits);
            if (format == "csv") {
                std::ostringstream os;
                os << "component,energy,area\n";
                auto row = [&](const char* n, double e, double a) { os << n << "," << e << "," << a << "\n"; };
                row("weight_sram", r.energy.weight_sram, r.area.weight_sram);
                row("multipliers", r.energy.multipliers, r.area.multipliers);
                row("adder_tree", r.energy.adder_tree, r.area.adder_tree);
                row("register_file", r.energy.register_file, r.area.register_file);
                row("quantizer", r.energy.quantizer, r.area.quantizer);
                row("routing", r.energy.routing, r.area.routing);
                row("total", r.energy.total(), r.area.total());
                out_text(out, os.str());
            } else {
                json j = cost_report_json(cfg, nullptr, m, params, 0, 0);
                j["pe"] = cost::cost_to_json(r);
                out_text(out, dump_json(j));
            }
        } else if (*c_sweep) {
            const auto s = cost::load_sweep(spec);
            std::ostringstream os;
            cost::run_sweep(s, os, jobs);
            out_text(out, os.str());
        } else if (*c_cmp) {
            const auto cfg = o.load_cfg();
            const auto cmp = compare(load_any_model(model, cfg, o.compress()), cfg, base);
            out_text(out, format == "csv" ? comparison_to_csv(cmp) : dump_json(comparison_to_json(cmp)));
        } else if (*c_pipe) {
            PipelineOptions po;
            po.model = model;
            po.config = o.config;
            po.out_dir = out_dir;
            if (!input.empty()) po.input = input;
            po.compress = o.compress();
            po.mode = parse_pe_mode(mode);
            po.trace = want_trace;
            const json m = run_pipeline(po);
            log::info("pipeline finished: ", out_dir);
            std::cout << dump_json(m);
        }
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const InternalError& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
