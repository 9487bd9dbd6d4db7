// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#include "apu/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <unordered_map>

#include "apu/error.hpp"
#include "apu/log.hpp"
#include "apu/ops.hpp"
#include "apu/quant.hpp"

namespace apu::sim {

namespace {

using namespace apu::mapper;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

// Decoded weight operands of one lowered block.
struct BlockOperands {
    std::vector<std::int64_t> w;
    std::vector<std::int64_t> b;
};

struct AttnState {
    std::size_t head = 0;
    std::vector<std::int64_t> w_proj;  // [3K, D]
    std::vector<std::int64_t> w_out;   // [D, K]
    std::vector<std::int64_t> q, k, v, kt, vt, hd;
    std::vector<std::vector<std::int64_t>> scores, probs;
    std::vector<std::int64_t>* sram = nullptr;
    int sram_bits = 4;
};

class Engine {
public:
    Engine(const MappedProgram& p, const SimOptions& o, bool functional) : prog_(p), opts_(o), functional_(functional) {
        const auto& c = prog_.config;
        N_ = c.num_pes;
        rep_.program = prog_.name;
        rep_.mode = opts_.mode;
        rep_.pe_busy.assign(N_, 0);
        rep_.ops_per_pe_cycle = normalized_ops_per_cycle(c.pe_cols, c.weight_bits, c.activation_bits);
        if (opts_.trace) *opts_.trace << "cycle,unit,event\n";
    }

    SimReport run(const Tensor* input) {
        if (functional_) {
            if (prog_.shape_only) throw InputError("program '" + prog_.name + "' is shape-only; only timing simulation is possible");
            load_input(*input);
        }
        for (std::size_t li = 0; li < prog_.layers.size(); ++li) {
            const auto& L = prog_.layers[li];
            if (functional_ && li > 0 && prog_.layers[li - 1].output_banks != L.input_banks)
                throw SimFault("layer '" + L.name + "' expects its inputs in other banks than the previous layer wrote", cycle_);
            run_layer(L);
        }
        finish();
        return std::move(rep_);
    }

private:
    const MappedProgram& prog_;
    SimOptions opts_;
    bool functional_;
    std::size_t N_ = 0;
    std::size_t cycle_ = 0;
    SimReport rep_;

    std::vector<std::int64_t> x_;  // codes of the current layer input
    std::vector<std::int64_t> y_;

    // Per-PE datapath state.
    std::vector<std::optional<std::size_t>> loaded_;
    std::vector<bool> pending_;
    std::vector<std::vector<std::int64_t>> latch_;
    std::vector<std::size_t> latch_ready_;  // first cycle at which the latch is usable

    int ab() const { return prog_.config.activation_bits; }

    void trace(std::size_t cycle, const std::string& unit, const std::string& event) {
        if (opts_.trace) *opts_.trace << cycle << "," << unit << "," << event << "\n";
    }

    void load_input(const Tensor& input) {
        if (shape_numel(input.shape()) != shape_numel(prog_.input_shape))
            throw ShapeError("input shape " + shape_str(input.shape()) + " does not match program input " +
                             shape_str(prog_.input_shape));
        const Tensor q = ir::quantize_input(input, prog_.quant);
        x_.assign(q.ints().begin(), q.ints().end());
    }

    void finish() {
        rep_.total_cycles = cycle_;
        std::size_t busy = 0, compute = 0;
        for (auto b : rep_.pe_busy) busy += b;
        for (const auto& l : rep_.layers) {
            auto it = l.phase_cycles.find("compute");
            if (it != l.phase_cycles.end()) compute += it->second;
        }
        rep_.utilization = cycle_ ? static_cast<double>(busy) / static_cast<double>(N_ * cycle_) : 0.0;
        rep_.compute_utilization = compute ? static_cast<double>(busy) / static_cast<double>(N_ * compute) : 0.0;
        rep_.normalized_ops = static_cast<std::uint64_t>(busy) * rep_.ops_per_pe_cycle;
        if (functional_) {
            const Shape out = prog_.layers.empty() ? prog_.input_shape : prog_.layers.back().output_shape;
            rep_.output = Tensor::integer(out, x_, ab());
        }
    }

    std::size_t compute_len(const Compute& c) const {
        return opts_.mode == PeMode::Spatial ? c.spatial_cycles : c.temporal_cycles;
    }

    void run_layer(const LayerPlan& L) {
        LayerTiming lt;
        lt.name = L.name;
        lt.kind = L.kind;
        lt.start = cycle_;
        lt.folds = L.folds;
        for (const char* k : {"route", "compute", "weight_load", "latch_fill", "host"}) lt.phase_cycles[k] = 0;

        loaded_.assign(N_, std::nullopt);
        pending_.assign(N_, false);
        latch_.assign(N_, {});
        latch_ready_.assign(N_, 0);
        y_.assign(functional_ ? shape_numel(L.output_shape) : 0, 0);

        std::optional<std::size_t> last_compute_start;
        std::optional<std::size_t> route_done;  // overlapped route still in flight
        std::vector<std::int64_t> partial(functional_ ? y_.size() : 0, 0);
        std::vector<std::int64_t> attn_acc;
        std::vector<AttnState> heads;
        if (functional_ && std::holds_alternative<AttentionPlan>(L.op)) {
            attn_acc.assign(y_.size(), 0);
            heads.resize(N_);
        }

        for (std::size_t i = 0; i < L.phases.size(); ++i) {
            const Phase& ph = L.phases[i];
            std::visit(
                overloaded{
                    [&](const RouteIn& r) {
                        const bool overlap = prog_.config.overlap_routing && r.fold > 0 && last_compute_start;
                        const std::size_t start = overlap ? *last_compute_start : cycle_;
                        trace(start, "router", "route " + L.name + " fold=" + std::to_string(r.fold) +
                                                   " transfers=" + std::to_string(r.transfers) + " cycles=" + std::to_string(r.cycles));
                        if (functional_) {
                            const auto* next = i + 1 < L.phases.size() ? std::get_if<Compute>(&L.phases[i + 1]) : nullptr;
                            if (!next) throw InternalError("route phase of layer '" + L.name + "' is not followed by a compute phase");
                            route(L, r, *next, start);
                        }
                        if (overlap) {
                            route_done = start + r.cycles;
                        } else {
                            cycle_ += r.cycles;
                            lt.phase_cycles["route"] += r.cycles;
                        }
                    },
                    [&](const Compute& c) {
                        if (route_done) {
                            const std::size_t wait = *route_done > cycle_ ? *route_done - cycle_ : 0;
                            cycle_ += wait;
                            lt.phase_cycles["route"] += wait;
                            route_done.reset();
                        }
                        last_compute_start = cycle_;
                        const std::size_t len = compute_len(c);
                        for (std::size_t p = 0; p < c.tasks.size(); ++p) {
                            if (!c.tasks[p]) continue;
                            const std::size_t b = busy_of(L, c, p);
                            rep_.pe_busy[p] += b;
                            lt.busy += b;
                            if (opts_.trace)
                                trace(cycle_, "pe" + std::to_string(p),
                                      "compute " + L.name + " fold=" + std::to_string(c.fold) + " task=" +
                                          std::to_string(c.tasks[p]->block) + ":" + std::to_string(c.tasks[p]->position) +
                                          (c.step != AttnStep::None ? " step=" + to_string(c.step) : "") +
                                          " cycles=" + std::to_string(b));
                        }
                        if (functional_) {
                            if (const auto* mm = std::get_if<MatmulPlan>(&L.op))
                                compute_matmul(L, *mm, c, partial);
                            else
                                compute_attention(L, std::get<AttentionPlan>(L.op), c, heads, attn_acc);
                        }
                        cycle_ += len;
                        lt.phase_cycles["compute"] += len;
                    },
                    [&](const WeightLoad& w) {
                        trace(cycle_, "sram", "weight-load " + L.name + " fold=" + std::to_string(w.fold) +
                                                  (w.step != AttnStep::None ? " step=" + to_string(w.step) : "") +
                                                  " cycles=" + std::to_string(w.cycles));
                        for (std::size_t p = 0; p < N_ && p < w.pes.size(); ++p)
                            if (w.pes[p]) pending_[p] = true;
                        if (functional_ && w.step != AttnStep::None) attention_load(L, w, heads);
                        cycle_ += w.cycles;
                        lt.phase_cycles["weight_load"] += w.cycles;
                    },
                    [&](const LatchFill& f) {
                        trace(cycle_, "latch", "fill " + L.name + " step=" + to_string(f.step) + " cycles=" + std::to_string(f.cycles));
                        if (functional_) {
                            const auto* next = i + 1 < L.phases.size() ? std::get_if<Compute>(&L.phases[i + 1]) : nullptr;
                            if (!next) throw InternalError("latch fill of layer '" + L.name + "' is not followed by a compute phase");
                            attention_fill(L, f, *next, heads);
                        }
                        cycle_ += f.cycles;
                        lt.phase_cycles["latch_fill"] += f.cycles;
                        for (auto& r : latch_ready_) r = cycle_;
                    },
                    [&](const HostOp& h) {
                        trace(cycle_, "host", to_string(h.kind) + " " + L.name + " count=" + std::to_string(h.count) +
                                                  " cycles=" + std::to_string(h.cycles));
                        if (functional_) host_op(L, h, partial, heads, attn_acc);
                        cycle_ += h.cycles;
                        lt.phase_cycles["host"] += h.cycles;
                    },
                    [&](const Sync&) { trace(cycle_, "sync", L.name); }},
                ph);
        }
        if (route_done && *route_done > cycle_) {
            lt.phase_cycles["route"] += *route_done - cycle_;
            cycle_ = *route_done;
        }
        if (functional_) {
            if (std::holds_alternative<PoolPlan>(L.op))
                pool(L);
            else if (std::holds_alternative<ReluPlan>(L.op)) {
                for (std::size_t j = 0; j < x_.size(); ++j) y_[j] = std::max<std::int64_t>(x_[j], 0);
            }
            x_ = std::move(y_);
        }
        lt.cycles = cycle_ - lt.start;
        lt.utilization = lt.cycles ? static_cast<double>(lt.busy) / static_cast<double>(N_ * lt.cycles) : 0.0;
        const std::size_t cc = lt.phase_cycles["compute"];
        lt.compute_utilization = cc ? static_cast<double>(lt.busy) / static_cast<double>(N_ * cc) : 0.0;
        for (const auto& [k, v] : lt.phase_cycles) rep_.phase_cycles[k] += v;
        rep_.layers.push_back(std::move(lt));
    }

    std::size_t busy_of(const LayerPlan& L, const Compute& c, std::size_t p) const {
        if (const auto* mm = std::get_if<MatmulPlan>(&L.op)) {
            const auto& b = mm->blocks[c.tasks[p]->block];
            return opts_.mode == PeMode::Spatial ? b.rows.size() : b.cols.size();
        }
        return compute_len(c);
    }

    // Drive one schedule through the select tables and check every arrival
    // against the latch plan of the compute phase it feeds.
    void route(const LayerPlan& L, const RouteIn& r, const Compute& next, std::size_t start) {
        if (!r.schedule) throw InternalError("layer '" + L.name + "' has no materialized routing schedule");
        const auto& sched = *r.schedule;
        const auto plan = latch_plan(L, next);
        const auto sel = sched::emit_selects(sched, N_, N_);
        // Each arrival carries a static latch write address: the slot that
        // holds this activation in the compute phase it feeds.
        std::vector<std::unordered_map<std::uint64_t, std::size_t>> where(N_);
        std::vector<std::size_t> missing(N_, 0);
        std::vector<std::vector<bool>> filled(N_);
        for (std::size_t p = 0; p < N_; ++p) {
            latch_[p].assign(p < plan.size() ? plan[p].size() : 0, 0);  // padding slots stay zero
            filled[p].assign(latch_[p].size(), false);
            for (std::size_t k = 0; k < latch_[p].size(); ++k)
                if (plan[p][k]) {
                    where[p].emplace(*plan[p][k], k);
                    ++missing[p];
                }
        }
        std::vector<std::optional<std::uint64_t>> drive(N_);
        for (std::size_t t = 0; t < sched.length(); ++t) {
            const std::size_t now = start + t;
            std::fill(drive.begin(), drive.end(), std::nullopt);
            for (const auto& tr : sched.cycles[t]) {
                if (tr.source >= N_) throw SimFault("transfer from nonexistent bank " + std::to_string(tr.source), now);
                if (drive[tr.source]) throw SimFault("bank " + std::to_string(tr.source) + " driven twice", now);
                if (tr.activation >= L.input_banks.size())
                    throw SimFault("activation " + std::to_string(tr.activation) + " does not exist (layer has " +
                                       std::to_string(L.input_banks.size()) + ")",
                                   now);
                if (L.input_banks[tr.activation] != tr.source)
                    throw SimFault("activation " + std::to_string(tr.activation) + " read from bank " +
                                       std::to_string(tr.source) + " but lives in bank " +
                                       std::to_string(L.input_banks[tr.activation]),
                                   now);
                drive[tr.source] = tr.activation;
            }
            for (std::size_t d = 0; d < N_; ++d) {
                const auto s = sel.at(d, t);
                if (s == sched::SelectTable::kIdle) continue;
                if (s >= N_ || !drive[s]) throw SimFault("PE " + std::to_string(d) + " selects idle bank " + std::to_string(s), now);
                const std::uint64_t a = *drive[s];
                const auto it = where[d].find(a);
                if (it == where[d].end() || filled[d][it->second])
                    throw SimFault("PE " + std::to_string(d) + " received activation " + std::to_string(a) +
                                       " that its latch does not expect",
                                   now);
                latch_[d][it->second] = x_.at(a);
                filled[d][it->second] = true;
                --missing[d];
                latch_ready_[d] = std::max(latch_ready_[d], now + 1);
            }
        }
        for (std::size_t p = 0; p < N_; ++p)
            if (missing[p])
                throw SimFault(std::to_string(missing[p]) + " latch slots of PE " + std::to_string(p) + " never filled",
                               start + sched.length());
    }

    const BlockOperands& operands(const LayerPlan& L, const MatmulPlan& mm, std::size_t block,
                                  std::map<std::size_t, BlockOperands>& cache) {
        auto it = cache.find(block);
        if (it != cache.end()) return it->second;
        const auto& b = mm.blocks[block];
        BlockOperands ops;
        ops.w.resize(b.weights.numel());
        for (std::size_t j = 0; j < ops.w.size(); ++j) ops.w[j] = L.quant.decode(b.weights.ints()[j]);
        ops.b.assign(b.bias.ints().begin(), b.bias.ints().end());
        return cache.emplace(block, std::move(ops)).first->second;
    }

    std::map<std::size_t, BlockOperands> op_cache_;
    const LayerPlan* cache_owner_ = nullptr;

    void compute_matmul(const LayerPlan& L, const MatmulPlan& mm, const Compute& c, std::vector<std::int64_t>& partial) {
        if (cache_owner_ != &L) {
            op_cache_.clear();
            cache_owner_ = &L;
        }
        const double acc_scale = L.quant.weight_scale * L.input_scale;
        const PeOutputConfig out{acc_scale, L.output_scale, ab(), mm.relu, mm.host_reduce};
        const int ob = L.quant.operand_bits();
        for (std::size_t p = 0; p < c.tasks.size(); ++p) {
            if (!c.tasks[p]) continue;
            const PeTask& t = *c.tasks[p];
            if (loaded_[p] != t.block) {
                if (!(c.fold == 0 && !loaded_[p]) && !pending_[p])
                    throw SimFault("PE " + std::to_string(p) + " computes block " + std::to_string(t.block) +
                                       " without loading its weights",
                                   cycle_);
                loaded_[p] = t.block;
            }
            pending_[p] = false;
            if (latch_ready_[p] > cycle_)
                throw SimFault("PE " + std::to_string(p) + " reads its latch before the last arrival is visible", cycle_);
            const auto& b = mm.blocks[t.block];
            const auto& ops = operands(L, mm, t.block, op_cache_);
            PeState pe;
            pe.rows = b.rows.size();
            pe.cols = b.cols.size();
            pe.weights = ops.w;
            pe.bias = ops.b;
            pe.latch = latch_[p];
            pe.operand_bits = ob;
            pe.activation_bits = ab();
            pe.mode = opts_.mode;
            pe.acc_bits = temporal_acc_bits(ob, ab(), prog_.config.pe_cols);
            try {
                std::vector<std::int64_t> res(pe.rows);
                if (opts_.mode == PeMode::Spatial) {
                    for (std::size_t r = 0; r < pe.rows; ++r) res[r] = pe_output_step(pe, r, out);
                } else {
                    for (std::size_t col = 0; col < pe.cols; ++col) pe_temporal_step(pe, col);
                    if (pe.psum.empty()) pe.psum.assign(pe.rows, 0);
                    for (std::size_t r = 0; r < pe.rows; ++r) {
                        const std::int64_t acc = pe.psum[r] + (pe.bias.empty() ? 0 : pe.bias[r]);
                        res[r] = out.raw ? acc : requantize(acc, out.acc_scale, out.out_scale, out.bits, out.relu);
                    }
                }
                for (std::size_t r = 0; r < pe.rows; ++r) {
                    const std::size_t oi = mm.geom.output_index(b.rows[r], t.position);
                    if (mm.host_reduce)
                        partial.at(oi) += res[r];
                    else
                        y_.at(oi) = res[r];
                }
            } catch (const SimFault& f) {
                throw SimFault(std::string(f.what()).substr(f.what() ? std::string(f.what()).find(": ") + 2 : 0) +
                                   " (PE " + std::to_string(p) + ", layer '" + L.name + "')",
                               cycle_);
            }
        }
    }

    void compute_attention(const LayerPlan& L, const AttentionPlan& ap, const Compute& c, std::vector<AttnState>& heads,
                           std::vector<std::int64_t>& acc) {
        const auto& m = ap.mha;
        const std::size_t S = ap.seq, D = m.d_model, K = m.d_k;
        const auto& lq = L.quant;
        const double proj_scale = lq.weight_scale * L.input_scale;
        for (std::size_t p = 0; p < c.tasks.size(); ++p) {
            if (!c.tasks[p]) continue;
            AttnState& st = heads[p];
            const std::size_t h = c.tasks[p]->block, t = c.tasks[p]->position;
            PeState pe;
            pe.activation_bits = ab();
            pe.latch = latch_[p];
            if (c.step == AttnStep::Project) {
                if (st.w_proj.empty() || st.head != h) {
                    st = AttnState{};
                    st.head = h;
                    st.w_proj.resize(3 * K * D);
                    for (std::size_t j = 0; j < K; ++j)
                        for (std::size_t d = 0; d < D; ++d) {
                            const std::size_t w = (h * K + j) * D + d;
                            st.w_proj[j * D + d] = lq.decode(m.w_q.ints()[w]);
                            st.w_proj[(K + j) * D + d] = lq.decode(m.w_k.ints()[w]);
                            st.w_proj[(2 * K + j) * D + d] = lq.decode(m.w_v.ints()[w]);
                        }
                    st.q.assign(S * K, 0);
                    st.k.assign(S * K, 0);
                    st.v.assign(S * K, 0);
                    st.hd.assign(S * K, 0);
                    st.scores.assign(S, {});
                    st.probs.assign(S, {});
                }
                pe.rows = 3 * K;
                pe.cols = D;
                pe.weights = st.w_proj;
                pe.operand_bits = lq.operand_bits();
                for (std::size_t j = 0; j < K; ++j) {
                    st.q[t * K + j] = pe_output_step(pe, j, {proj_scale, lq.q_scale, ab(), false, false});
                    st.k[t * K + j] = pe_output_step(pe, K + j, {proj_scale, lq.k_scale, ab(), false, false});
                    st.v[t * K + j] = pe_output_step(pe, 2 * K + j, {proj_scale, lq.v_scale, ab(), false, false});
                }
            } else if (c.step == AttnStep::Scores) {
                pe.rows = S;
                pe.cols = K;
                pe.weights = st.k;
                pe.operand_bits = ab();
                st.scores[t].resize(S);
                for (std::size_t u = 0; u < S; ++u) st.scores[t][u] = pe_output_step(pe, u, {1, 1, ab(), false, true});
            } else if (c.step == AttnStep::Mix) {
                pe.rows = K;
                pe.cols = S;
                pe.weights = st.vt;
                pe.operand_bits = ab();
                const double p_scale = softmax_prob_scale(ab());
                for (std::size_t j = 0; j < K; ++j)
                    st.hd[t * K + j] = pe_output_step(pe, j, {p_scale * lq.v_scale, lq.head_scale, ab(), false, false});
            } else if (c.step == AttnStep::Output) {
                pe.rows = D;
                pe.cols = K;
                pe.weights = st.w_out;
                pe.operand_bits = lq.operand_bits();
                for (std::size_t d = 0; d < D; ++d) acc[t * D + d] += pe_output_step(pe, d, {1, 1, ab(), false, true});
            }
        }
    }

    void attention_load(const LayerPlan& L, const WeightLoad& w, std::vector<AttnState>& heads) {
        const auto& ap = std::get<AttentionPlan>(L.op);
        const auto& m = ap.mha;
        const std::size_t S = ap.seq, D = m.d_model, K = m.d_k;
        for (std::size_t p = 0; p < N_; ++p) {
            if (p >= w.pes.size() || !w.pes[p]) continue;
            AttnState& st = heads[p];
            if (w.step == AttnStep::Mix) {
                st.vt.assign(K * S, 0);
                for (std::size_t u = 0; u < S; ++u)
                    for (std::size_t j = 0; j < K; ++j) st.vt[j * S + u] = st.v[u * K + j];
            } else if (w.step == AttnStep::Output) {
                st.w_out.resize(D * K);
                for (std::size_t i = 0; i < D * K; ++i) st.w_out[i] = L.quant.decode(m.w_o.ints()[st.head * D * K + i]);
            }
        }
    }

    void attention_fill(const LayerPlan&, const LatchFill& f, const Compute& next, std::vector<AttnState>& heads) {
        for (std::size_t p = 0; p < next.tasks.size(); ++p) {
            if (!next.tasks[p]) continue;
            const AttnState& st = heads[p];
            const std::size_t t = next.tasks[p]->position;
            const std::size_t K = st.q.size() / st.scores.size();
            if (f.step == AttnStep::Scores)
                latch_[p].assign(st.q.begin() + t * K, st.q.begin() + (t + 1) * K);
            else if (f.step == AttnStep::Mix)
                latch_[p] = st.probs.at(t);
            else if (f.step == AttnStep::Output)
                latch_[p].assign(st.hd.begin() + t * K, st.hd.begin() + (t + 1) * K);
        }
    }

    void host_op(const LayerPlan& L, const HostOp& h, std::vector<std::int64_t>& partial, std::vector<AttnState>& heads,
                 std::vector<std::int64_t>& attn_acc) {
        if (const auto* mm = std::get_if<MatmulPlan>(&L.op)) {
            if (h.kind != HostOpKind::Activation || !mm->host_reduce) return;
            const double acc_scale = L.quant.weight_scale * L.input_scale;
            const std::size_t P = mm->geom.positions();
            for (std::size_t i = 0; i < y_.size(); ++i) {
                const std::int64_t bias = mm->host_bias.empty() ? 0 : mm->host_bias[i / P];
                y_[i] = requantize(partial[i] + bias, acc_scale, L.output_scale, ab(), mm->relu);
            }
        } else if (const auto* ap = std::get_if<AttentionPlan>(&L.op)) {
            if (h.kind == HostOpKind::Softmax) {
                const double score_scale = L.quant.q_scale * L.quant.k_scale / std::sqrt(static_cast<double>(ap->mha.d_k));
                for (auto& st : heads)
                    for (std::size_t t = 0; t < st.scores.size(); ++t)
                        if (!st.scores[t].empty()) st.probs[t] = softmax_codes(st.scores[t], score_scale, ab());
            } else if (h.kind == HostOpKind::Activation) {
                for (std::size_t i = 0; i < y_.size(); ++i)
                    y_[i] = requantize(attn_acc[i], L.quant.weight_scale * L.quant.head_scale, L.output_scale, ab(), false);
            }
        }
    }

    void pool(const LayerPlan& L) {
        const auto& pp = std::get<PoolPlan>(L.op);
        if (pp.passthrough) {
            y_ = x_;
            return;
        }
        const auto& p = pp.pool;
        const std::size_t C = L.input_shape[0], H = L.input_shape[1], W = L.input_shape[2];
        const std::size_t OH = L.output_shape[1], OW = L.output_shape[2];
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t oy = 0; oy < OH; ++oy)
                for (std::size_t ox = 0; ox < OW; ++ox) {
                    std::optional<std::int64_t> best;
                    for (std::size_t ky = 0; ky < p.window[0]; ++ky)
                        for (std::size_t kx = 0; kx < p.window[1]; ++kx) {
                            const auto iy = static_cast<std::ptrdiff_t>(oy * p.stride[0] + ky) - static_cast<std::ptrdiff_t>(p.padding[0]);
                            const auto ix = static_cast<std::ptrdiff_t>(ox * p.stride[1] + kx) - static_cast<std::ptrdiff_t>(p.padding[1]);
                            if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(H) || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                            const auto v = x_[(c * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix)];
                            if (!best || v > *best) best = v;
                        }
                    y_[(c * OH + oy) * OW + ox] = best.value_or(0);
                }
    }
};

}  // namespace

SimReport simulate_timing(const MappedProgram& program, const SimOptions& opts) {
    return Engine(program, opts, false).run(nullptr);
}

SimReport simulate(const MappedProgram& program, const Tensor& input, const SimOptions& opts) {
    return Engine(program, opts, true).run(&input);
}

json report_to_json(const SimReport& r) {
    json j;
    j["program"] = r.program;
    j["mode"] = to_string(r.mode);
    j["total_cycles"] = r.total_cycles;
    j["phase_cycles"] = json::object();
    for (const auto& [k, v] : r.phase_cycles) j["phase_cycles"][k] = v;
    j["utilization"] = r.utilization;
    j["compute_utilization"] = r.compute_utilization;
    j["ops_per_pe_cycle"] = r.ops_per_pe_cycle;
    j["normalized_ops"] = r.normalized_ops;
    j["pe_busy_cycles"] = r.pe_busy;
    json layers = json::array();
    for (const auto& l : r.layers) {
        json lj;
        lj["name"] = l.name;
        lj["kind"] = l.kind;
        lj["start"] = l.start;
        lj["cycles"] = l.cycles;
        lj["folds"] = l.folds;
        lj["phase_cycles"] = json::object();
        for (const auto& [k, v] : l.phase_cycles) lj["phase_cycles"][k] = v;
        lj["busy_pe_cycles"] = l.busy;
        lj["utilization"] = l.utilization;
        lj["compute_utilization"] = l.compute_utilization;
        layers.push_back(std::move(lj));
    }
    j["layers"] = std::move(layers);
    if (r.output) j["output"] = tensor_to_json(*r.output);
    return j;
}

}  // namespace apu::sim
