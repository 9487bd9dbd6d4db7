// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#include "apu/mapper.hpp"

#include <algorithm>
#include <sstream>

#include "apu/error.hpp"
#include "apu/pruner.hpp"

namespace apu::mapper {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

RouteIn make_route(const LayerPlan& plan, const Compute& c, std::size_t N, const MapOptions& opts) {
    const auto latches = latch_plan(plan, c);
    RouteIn r;
    r.fold = c.fold;
    if (opts.materialize_routes) {
        sched::RoutingDemand d;
        d.num_sources = N;
        d.num_dests = N;
        for (std::size_t p = 0; p < latches.size(); ++p)
            for (const auto& a : latches[p])
                if (a) d.triples.push_back({plan.input_banks.at(*a), static_cast<std::uint32_t>(p), *a});
        auto s = std::make_shared<sched::RoutingSchedule>(sched::build_schedule(d));
        r.cycles = s->length();
        r.transfers = d.triples.size();
        r.schedule = std::move(s);
        return r;
    }
    std::vector<std::size_t> snd(N, 0), rcv(N, 0);
    for (std::size_t p = 0; p < latches.size(); ++p)
        for (const auto& a : latches[p])
            if (a) {
                ++snd[plan.input_banks.at(*a)];
                ++rcv[p];
                ++r.transfers;
            }
    r.cycles = std::max(*std::max_element(snd.begin(), snd.end()), *std::max_element(rcv.begin(), rcv.end()));
    return r;
}

// Lockstep folds over a flat task list; task i of fold f runs on PE i.
void emit_matmul_phases(LayerPlan& plan, const std::vector<PeTask>& tasks, const AcceleratorConfig& cfg,
                        const MapOptions& opts) {
    const auto& mm = std::get<MatmulPlan>(plan.op);
    const std::size_t N = cfg.num_pes;
    plan.folds = ceil_div(tasks.size(), N);
    std::vector<std::optional<std::size_t>> resident(N);
    for (std::size_t f = 0; f < plan.folds; ++f) {
        Compute c;
        c.fold = f;
        c.tasks.assign(N, std::nullopt);
        WeightLoad wl;
        wl.fold = f;
        wl.pes.assign(N, 0);
        bool reload = false;
        for (std::size_t i = 0; i < N && f * N + i < tasks.size(); ++i) {
            const PeTask& t = tasks[f * N + i];
            c.tasks[i] = t;
            const auto& b = mm.blocks[t.block];
            c.spatial_cycles = std::max(c.spatial_cycles, b.rows.size());
            c.temporal_cycles = std::max(c.temporal_cycles, b.cols.size());
            if (f > 0 && resident[i] != t.block) {
                wl.pes[i] = 1;
                reload = true;
            }
            resident[i] = t.block;
        }
        if (reload) {
            wl.cycles = cfg.pe_rows * cfg.reload_cycles_per_row;
            plan.phases.push_back(std::move(wl));
        }
        plan.phases.push_back(make_route(plan, c, N, opts));
        plan.phases.push_back(std::move(c));
    }
}

void set_task_banks(LayerPlan& plan, const std::vector<PeTask>& tasks, std::size_t N) {
    const auto& mm = std::get<MatmulPlan>(plan.op);
    plan.output_banks.assign(shape_numel(plan.output_shape), 0);
    for (std::size_t t = 0; t < tasks.size(); ++t)
        for (auto row : mm.blocks[tasks[t].block].rows)
            plan.output_banks[mm.geom.output_index(row, tasks[t].position)] = static_cast<std::uint32_t>(t % N);
}

Tensor sub_matrix(const Tensor& src, std::size_t src_cols, const std::vector<std::size_t>& rows,
                  const std::vector<std::size_t>& cols, std::size_t row_base, std::size_t col_base) {
    if (!src.has_data()) return Tensor::shape_only({rows.size(), cols.size()}, DType::Int, src.bits());
    std::vector<std::int64_t> v(rows.size() * cols.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j)
            v[i * cols.size() + j] = src.ints()[(rows[i] - row_base) * src_cols + (cols[j] - col_base)];
    return Tensor::integer({rows.size(), cols.size()}, std::move(v), src.bits());
}

Tensor bias_slice(const Tensor& bias, const std::vector<std::size_t>& rows, bool zero) {
    if (!bias.has_data()) return Tensor::shape_only({rows.size()}, DType::Int, 32);
    std::vector<std::int64_t> v(rows.size(), 0);
    if (!zero)
        for (std::size_t i = 0; i < rows.size(); ++i) v[i] = bias.ints()[rows[i]];
    return Tensor::integer({rows.size()}, std::move(v), bias.bits());
}

std::vector<std::size_t> iota(std::size_t begin, std::size_t end) {
    std::vector<std::size_t> v;
    for (std::size_t i = begin; i < end; ++i) v.push_back(i);
    return v;
}

}  // namespace

std::string to_string(ConvCase c) {
    switch (c) {
        case ConvCase::None: return "-";
        case ConvCase::I: return "I";
        case ConvCase::II: return "II";
        case ConvCase::III: return "III";
    }
    return "?";
}

std::string to_string(AttnStep s) {
    switch (s) {
        case AttnStep::None: return "-";
        case AttnStep::Project: return "qkv";
        case AttnStep::Scores: return "scores";
        case AttnStep::Mix: return "mix";
        case AttnStep::Output: return "out";
    }
    return "?";
}

std::string phase_name(const Phase& p) {
    return std::visit(overloaded{[](const RouteIn&) { return "route-in"; }, [](const Compute&) { return "compute"; },
                                 [](const WeightLoad&) { return "weight-load"; },
                                 [](const LatchFill&) { return "latch-fill"; }, [](const HostOp&) { return "host-op"; },
                                 [](const Sync&) { return "sync"; }},
                      p);
}

std::optional<std::size_t> Geometry::input_index(std::size_t col, std::size_t pos) const {
    if (!conv) return col;
    const std::size_t khw = KH * KW;
    const std::size_t c = col / khw, r = col % khw, ky = r / KW, kx = r % KW;
    const std::size_t oy = pos / OW, ox = pos % OW;
    const auto iy = static_cast<std::ptrdiff_t>(oy * SH + ky) - static_cast<std::ptrdiff_t>(PH);
    const auto ix = static_cast<std::ptrdiff_t>(ox * SW + kx) - static_cast<std::ptrdiff_t>(PW);
    if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(H) || ix >= static_cast<std::ptrdiff_t>(W))
        return std::nullopt;
    return (c * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix);
}

std::vector<std::vector<std::optional<std::size_t>>> latch_plan(const LayerPlan& layer, const Compute& c) {
    std::vector<std::vector<std::optional<std::size_t>>> out(c.tasks.size());
    if (const auto* mm = std::get_if<MatmulPlan>(&layer.op)) {
        for (std::size_t p = 0; p < c.tasks.size(); ++p) {
            if (!c.tasks[p]) continue;
            const auto& b = mm->blocks.at(c.tasks[p]->block);
            out[p].reserve(b.cols.size());
            for (auto col : b.cols) out[p].push_back(mm->geom.input_index(col, c.tasks[p]->position));
        }
    } else if (const auto* at = std::get_if<AttentionPlan>(&layer.op)) {
        if (c.step != AttnStep::Project) return out;
        const std::size_t D = at->mha.d_model;
        for (std::size_t p = 0; p < c.tasks.size(); ++p) {
            if (!c.tasks[p]) continue;
            for (std::size_t d = 0; d < D; ++d) out[p].push_back(c.tasks[p]->position * D + d);
        }
    }
    return out;
}

std::vector<std::uint32_t> host_banks(std::size_t n, std::size_t num_banks) {
    std::vector<std::uint32_t> b(n);
    for (std::size_t a = 0; a < n; ++a) b[a] = static_cast<std::uint32_t>(a * num_banks / n);
    return b;
}

ConvCase select_conv_case(const ir::Conv2D& conv, const AcceleratorConfig& cfg) {
    if (conv.groups > 1) return ConvCase::III;
    const std::size_t K = conv.in_channels() * conv.kh() * conv.kw();
    if (K <= cfg.pe_cols && conv.out_channels() <= cfg.pe_rows) return ConvCase::I;
    return ConvCase::II;
}

LayerPlan map_fc(const std::string& name, const prune::FcStage& st, const Shape& in, const Shape& out,
                 const AcceleratorConfig& cfg, std::vector<std::uint32_t> input_banks, const MapOptions& opts) {
    const auto& L = st.layer;
    LayerPlan plan;
    plan.name = name;
    plan.kind = "fc";
    plan.input_shape = in;
    plan.output_shape = out;
    plan.input_banks = std::move(input_banks);
    MatmulPlan mm;
    mm.geom.in_size = shape_numel(in);
    mm.relu = st.relu;
    for (std::size_t k = 0; k < L.num_blocks(); ++k) {
        const auto& b = L.blocks[k];
        if (b.rows() > cfg.pe_rows || b.cols() > cfg.pe_cols) {
            const std::size_t need = std::max(ceil_div(L.original_shape[0], cfg.pe_rows), ceil_div(L.original_shape[1], cfg.pe_cols));
            throw CapacityError("layer '" + name + "': block " + std::to_string(k) + " is " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + " but a PE holds " + std::to_string(cfg.pe_rows) + "x" +
                                std::to_string(cfg.pe_cols) + "; re-prune with at least " + std::to_string(need) + " blocks");
        }
        LoweredBlock lb;
        lb.rows = L.block_rows(k);
        lb.cols = L.block_cols(k);
        lb.weights = b.weights;
        lb.bias = b.bias;
        mm.blocks.push_back(std::move(lb));
    }
    plan.op = std::move(mm);
    std::vector<PeTask> tasks;
    for (std::size_t k = 0; k < L.num_blocks(); ++k) tasks.push_back({k, 0});
    emit_matmul_phases(plan, tasks, cfg, opts);
    plan.phases.push_back(Sync{});
    set_task_banks(plan, tasks, cfg.num_pes);
    return plan;
}

LayerPlan map_conv(const std::string& name, const prune::ConvStage& st, const Shape& in, const Shape& out,
                   const AcceleratorConfig& cfg, std::vector<std::uint32_t> input_banks, const MapOptions& opts) {
    const ir::Conv2D& cv = st.conv;
    LayerPlan plan;
    plan.name = name;
    plan.kind = "conv";
    plan.input_shape = in;
    plan.output_shape = out;
    plan.input_banks = std::move(input_banks);

    MatmulPlan mm;
    mm.relu = st.relu;
    mm.conv_case = select_conv_case(cv, cfg);
    auto& g = mm.geom;
    g.conv = true;
    g.in_size = shape_numel(in);
    g.C = in[0];
    g.H = in[1];
    g.W = in[2];
    g.KH = cv.kh();
    g.KW = cv.kw();
    g.SH = cv.stride[0];
    g.SW = cv.stride[1];
    g.PH = cv.padding[0];
    g.PW = cv.padding[1];
    g.OH = out[1];
    g.OW = out[2];

    const std::size_t Co = cv.out_channels(), G = cv.groups, Cg = cv.kernel.dim(1);
    const std::size_t Kg = Cg * g.KH * g.KW, Cog = Co / G, P = g.positions();

    if (mm.conv_case == ConvCase::III || mm.conv_case == ConvCase::I) {
        if (Cog > cfg.pe_rows || Kg > cfg.pe_cols)
            throw CapacityError("layer '" + name + "': group kernel is " + std::to_string(Cog) + "x" + std::to_string(Kg) +
                                " but a PE holds " + std::to_string(cfg.pe_rows) + "x" + std::to_string(cfg.pe_cols) +
                                "; split each group across PEs (case II within the group) or use more groups");
        for (std::size_t j = 0; j < G; ++j) {
            LoweredBlock lb;
            lb.rows = iota(j * Cog, (j + 1) * Cog);
            lb.cols = iota(j * Kg, (j + 1) * Kg);
            lb.weights = sub_matrix(cv.kernel, Kg, lb.rows, lb.cols, 0, j * Kg);
            lb.bias = bias_slice(cv.bias, lb.rows, false);
            mm.blocks.push_back(std::move(lb));
        }
    } else {
        const std::size_t rt = ceil_div(Co, cfg.pe_rows), ct = ceil_div(Kg, cfg.pe_cols);
        mm.host_reduce = true;
        mm.col_tiles = ct;
        for (std::size_t i = 0; i < rt; ++i)
            for (std::size_t j = 0; j < ct; ++j) {
                auto [r0, r1] = prune::block_range(Co, rt, i);
                auto [c0, c1] = prune::block_range(Kg, ct, j);
                LoweredBlock lb;
                lb.rows = iota(r0, r1);
                lb.cols = iota(c0, c1);
                lb.weights = sub_matrix(cv.kernel, Kg, lb.rows, lb.cols, 0, 0);
                lb.bias = bias_slice(cv.bias, lb.rows, true);
                mm.blocks.push_back(std::move(lb));
            }
        if (cv.bias.has_data()) mm.host_bias.assign(cv.bias.ints().begin(), cv.bias.ints().end());
    }
    const std::size_t nblocks = mm.blocks.size();
    plan.op = std::move(mm);

    std::vector<PeTask> tasks;
    tasks.reserve(nblocks * P);
    for (std::size_t b = 0; b < nblocks; ++b)
        for (std::size_t q = 0; q < P; ++q) tasks.push_back({b, q});
    emit_matmul_phases(plan, tasks, cfg, opts);

    const auto& m = std::get<MatmulPlan>(plan.op);
    if (m.host_reduce) {
        const std::size_t adds = P * Co * (m.col_tiles - 1);
        if (adds) plan.phases.push_back(HostOp{HostOpKind::Add, adds, cfg.host_cycles(HostOpKind::Add, adds)});
        plan.phases.push_back(HostOp{HostOpKind::Activation, P * Co, cfg.host_cycles(HostOpKind::Activation, P * Co)});
        plan.output_banks = host_banks(shape_numel(out), cfg.num_pes);
    } else {
        set_task_banks(plan, tasks, cfg.num_pes);
    }
    plan.phases.push_back(Sync{});
    return plan;
}

LayerPlan map_attention(const std::string& name, const prune::AttentionStage& st, const Shape& in,
                        const AcceleratorConfig& cfg, std::vector<std::uint32_t> input_banks, const MapOptions& opts) {
    const auto& m = st.mha;
    const std::size_t S = in.at(0), D = m.d_model, K = m.d_k, H = cfg.pe_rows, W = cfg.pe_cols, N = cfg.num_pes;
    auto need = [&](bool ok, const std::string& what) {
        if (!ok)
            throw CapacityError("layer '" + name + "': " + what + " exceeds PE capacity " + std::to_string(H) + "x" +
                                std::to_string(W));
    };
    need(3 * K <= H && D <= W, "stacked Q/K/V projection (" + std::to_string(3 * K) + "x" + std::to_string(D) + ")");
    need(S <= H && K <= W, "key matrix (" + std::to_string(S) + "x" + std::to_string(K) + ")");
    need(K <= H && S <= W, "value matrix (" + std::to_string(K) + "x" + std::to_string(S) + ")");
    need(D <= H && K <= W, "output projection (" + std::to_string(D) + "x" + std::to_string(K) + ")");

    LayerPlan plan;
    plan.name = name;
    plan.kind = "attention";
    plan.input_shape = in;
    plan.output_shape = in;
    plan.input_banks = std::move(input_banks);
    plan.op = AttentionPlan{m, S};
    plan.folds = ceil_div(m.heads, N);
    const std::size_t cpr = cfg.reload_cycles_per_row;

    for (std::size_t f = 0; f < plan.folds; ++f) {
        TaskList heads(N);
        std::vector<std::uint8_t> active(N, 0);
        std::size_t nh = 0;
        for (std::size_t i = 0; i < N && f * N + i < m.heads; ++i, ++nh) {
            heads[i] = PeTask{f * N + i, 0};
            active[i] = 1;
        }
        auto at = [&](std::size_t t) {
            TaskList tl = heads;
            for (auto& x : tl)
                if (x) x->position = t;
            return tl;
        };
        if (f > 0) plan.phases.push_back(WeightLoad{f, 3 * K * cpr, active, AttnStep::Project});
        for (std::size_t t = 0; t < S; ++t) {
            Compute c{f, at(t), 3 * K, D, AttnStep::Project};
            plan.phases.push_back(make_route(plan, c, N, opts));
            plan.phases.push_back(std::move(c));
        }
        plan.phases.push_back(WeightLoad{f, S * cpr, active, AttnStep::Scores});
        for (std::size_t t = 0; t < S; ++t) {
            plan.phases.push_back(LatchFill{f, K, AttnStep::Scores});
            plan.phases.push_back(Compute{f, at(t), S, K, AttnStep::Scores});
        }
        const std::size_t sm = nh * S * S;
        plan.phases.push_back(HostOp{HostOpKind::Softmax, sm, cfg.host_cycles(HostOpKind::Softmax, sm)});
        plan.phases.push_back(WeightLoad{f, K * cpr, active, AttnStep::Mix});
        for (std::size_t t = 0; t < S; ++t) {
            plan.phases.push_back(LatchFill{f, S, AttnStep::Mix});
            plan.phases.push_back(Compute{f, at(t), K, S, AttnStep::Mix});
        }
        plan.phases.push_back(WeightLoad{f, D * cpr, active, AttnStep::Output});
        for (std::size_t t = 0; t < S; ++t) {
            plan.phases.push_back(LatchFill{f, K, AttnStep::Output});
            plan.phases.push_back(Compute{f, at(t), D, K, AttnStep::Output});
        }
    }
    const std::size_t adds = S * D * (m.heads - 1);
    if (adds) plan.phases.push_back(HostOp{HostOpKind::Add, adds, cfg.host_cycles(HostOpKind::Add, adds)});
    plan.phases.push_back(HostOp{HostOpKind::Activation, S * D, cfg.host_cycles(HostOpKind::Activation, S * D)});
    plan.phases.push_back(Sync{});
    plan.output_banks = host_banks(S * D, N);
    return plan;
}

LayerPlan map_pool(const std::string& name, const prune::PoolStage& st, const Shape& in, const Shape& out,
                   const AcceleratorConfig& cfg, std::vector<std::uint32_t> input_banks) {
    LayerPlan plan;
    plan.name = name;
    plan.kind = "pool";
    plan.input_shape = in;
    plan.output_shape = out;
    plan.input_banks = std::move(input_banks);
    const auto& p = st.pool;
    PoolPlan pp{p, p.window == ir::Pair{1, 1} && p.stride == ir::Pair{1, 1} && p.padding == ir::Pair{0, 0}};
    if (pp.passthrough) {
        plan.output_banks = plan.input_banks;
    } else {
        const std::size_t n = shape_numel(out) * p.window[0] * p.window[1];
        plan.phases.push_back(HostOp{HostOpKind::Compare, n, cfg.host_cycles(HostOpKind::Compare, n)});
        plan.phases.push_back(Sync{});
        plan.output_banks = host_banks(shape_numel(out), cfg.num_pes);
    }
    plan.op = pp;
    return plan;
}

MappedProgram map_model(const prune::CompressedModel& model, const AcceleratorConfig& cfg, const MapOptions& opts_in) {
    cfg.validate();
    if (model.quant.weight_bits != cfg.weight_bits || model.quant.activation_bits != cfg.activation_bits)
        throw InputError("model '" + model.name + "' is quantized to " + std::to_string(model.quant.weight_bits) + "/" +
                         std::to_string(model.quant.activation_bits) + "-bit weights/activations but the accelerator is " +
                         std::to_string(cfg.weight_bits) + "/" + std::to_string(cfg.activation_bits));
    MapOptions opts = opts_in;
    if (model.shape_only) opts.materialize_routes = false;

    MappedProgram prog;
    prog.name = model.name;
    prog.config = cfg;
    prog.input_shape = model.input_shape;
    prog.quant = model.quant;
    prog.shape_only = model.shape_only;

    auto banks = host_banks(shape_numel(model.input_shape), cfg.num_pes);
    double s = model.quant.input_scale;
    for (const auto& l : model.layers) {
        if (model.independent_layers) banks = host_banks(shape_numel(l.input_shape), cfg.num_pes);
        LayerPlan plan = std::visit(
            overloaded{
                [&](const prune::FcStage& st) { return map_fc(l.name, st, l.input_shape, l.output_shape, cfg, banks, opts); },
                [&](const prune::ConvStage& st) {
                    return map_conv(l.name, st, l.input_shape, l.output_shape, cfg, banks, opts);
                },
                [&](const prune::PoolStage& st) { return map_pool(l.name, st, l.input_shape, l.output_shape, cfg, banks); },
                [&](const prune::ReluStage&) {
                    LayerPlan p;
                    p.name = l.name;
                    p.kind = "relu";
                    p.input_shape = l.input_shape;
                    p.output_shape = l.output_shape;
                    p.input_banks = banks;
                    p.op = ReluPlan{};
                    const std::size_t n = shape_numel(l.input_shape);
                    p.phases.push_back(HostOp{HostOpKind::Relu, n, cfg.host_cycles(HostOpKind::Relu, n)});
                    p.phases.push_back(Sync{});
                    p.output_banks = host_banks(n, cfg.num_pes);
                    return p;
                },
                [&](const prune::AttentionStage& st) { return map_attention(l.name, st, l.input_shape, cfg, banks, opts); }},
            l.op);
        plan.input_scale = s;
        if (auto it = model.quant.layers.find(l.name); it != model.quant.layers.end()) {
            plan.quant = it->second;
            s = it->second.output_scale;
        }
        plan.output_scale = s;
        banks = plan.output_banks;
        prog.layers.push_back(std::move(plan));
    }
    return prog;
}

std::string dump_program(const MappedProgram& p) {
    std::ostringstream os;
    const auto& c = p.config;
    os << "program " << p.name << "\n";
    os << "  pes " << c.num_pes << " of " << c.pe_rows << "x" << c.pe_cols << ", w" << c.weight_bits << "/a"
       << c.activation_bits << ", interconnect " << to_string(c.interconnect) << (p.shape_only ? ", shape-only" : "")
       << "\n";
    for (const auto& l : p.layers) {
        os << "layer " << l.name << " (" << l.kind;
        if (const auto* mm = std::get_if<MatmulPlan>(&l.op)) {
            os << ", blocks " << mm->blocks.size();
            if (mm->conv_case != ConvCase::None) os << ", case " << to_string(mm->conv_case);
            if (mm->relu) os << ", relu";
        }
        os << ") " << shape_str(l.input_shape) << " -> " << shape_str(l.output_shape) << ", folds " << l.folds << "\n";
        for (const auto& ph : l.phases) {
            os << "  " << phase_name(ph);
            std::visit(overloaded{[&](const RouteIn& r) {
                                      os << " fold=" << r.fold << " cycles=" << r.cycles << " transfers=" << r.transfers;
                                  },
                                  [&](const Compute& cp) {
                                      std::size_t busy = 0;
                                      for (const auto& t : cp.tasks) busy += t ? 1 : 0;
                                      os << " fold=" << cp.fold << " pes=" << busy << "/" << cp.tasks.size()
                                         << " spatial=" << cp.spatial_cycles << " temporal=" << cp.temporal_cycles;
                                      if (cp.step != AttnStep::None) os << " step=" << to_string(cp.step);
                                  },
                                  [&](const WeightLoad& w) {
                                      os << " fold=" << w.fold << " cycles=" << w.cycles;
                                      if (w.step != AttnStep::None) os << " step=" << to_string(w.step);
                                  },
                                  [&](const LatchFill& lf) {
                                      os << " fold=" << lf.fold << " cycles=" << lf.cycles << " step=" << to_string(lf.step);
                                  },
                                  [&](const HostOp& h) { os << " " << to_string(h.kind) << " count=" << h.count << " cycles=" << h.cycles; },
                                  [&](const Sync&) {}},
                       ph);
            os << "\n";
        }
    }
    return os.str();
}

}  // namespace apu::mapper
