// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../support.hpp"
#include "apu/costmodel.hpp"
#include "apu/digest.hpp"
#include "apu/manifest.hpp"
#include "apu/ops.hpp"
#include "apu/pipeline.hpp"
#include "apu/scheduler.hpp"
#include "apu/trainer.hpp"

using namespace apu;
namespace fs = std::filesystem;
using apu::testing::random_real;
using apu::testing::source_dir;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// 1 -------------------------------------------------------------------------
Outcome functional_oracle() {
    const auto t0 = Clock::now();
    Rng rng(20260101);
    std::size_t ok = 0, total = 0;
    std::string first_bad;
    std::map<std::string, std::size_t> kinds;
    for (std::size_t i = 0; i < 100; ++i) {
        const auto m = apu::testing::random_model(rng, i);
        for (const auto& l : m.layers) ++kinds[l.type_name()];
        const int bits = rng.below(2) ? 8 : 4;
        prune::CompressOptions co;
        co.num_blocks = 1 + rng.below(8);
        co.weight_bits = co.activation_bits = bits;
        co.seed = rng.next();
        const auto cfg = apu::testing::small_config(1 + rng.below(8), 64, bits, bits);
        const auto x = random_real(m.input_shape, rng, 1.0);
        ++total;
        try {
            const auto r = apu::testing::oracle_check(m, co, cfg, x);
            if (r.spatial_ok && r.temporal_ok) ++ok;
            else if (first_bad.empty()) first_bad = r.detail;
        } catch (const std::exception& e) {
            if (first_bad.empty()) first_bad = m.name + ": " + e.what();
        }
    }
    const double secs = seconds_since(t0);
    Outcome o;
    o.pass = ok == total && secs < 60.0;
    o.detail = std::to_string(ok) + "/" + std::to_string(total) + " models bit-exact in spatial and temporal mode, " +
               fmt("%.1f s", secs) + (first_bad.empty() ? "" : "; first mismatch: " + first_bad);
    o.detail += "; layers:";
    for (const auto& [k, n] : kinds) o.detail += " " + k + "=" + std::to_string(n);
    return o;
}

// 2 -------------------------------------------------------------------------
Outcome four_hundred_cycles() {
    const fs::path out = fs::temp_directory_path() / "apu_acceptance_fc4000";
    fs::remove_all(out);
    PipelineOptions o;
    o.model = source_dir() / "models/fc4000_demo.json";
    o.config = source_dir() / "configs/apu16.json";
    o.compress.num_blocks = 10;
    o.compress.seed = 42;
    o.out_dir = out;
    const auto manifest = run_pipeline(o);
    const auto rep = load_json(out / "sim_report.json");
    fs::remove_all(out);
    const auto& layer = rep.at("layers").at(0);
    const std::size_t compute = layer.at("phase_cycles").at("compute").get<std::size_t>();
    const double util = layer.at("compute_utilization").get<double>();
    Outcome r;
    r.pass = compute == 400 && util == 1.0 && manifest.at("oracle") == "match";
    r.detail = "4000x4000 FC, 10 blocks on 10 PEs of 400x400: compute " + std::to_string(compute) +
               " cycles, compute-phase utilization " + fmt("%.3f", util) + ", oracle " +
               manifest.at("oracle").get<std::string>();
    return r;
}

// 3 -------------------------------------------------------------------------
Outcome throughput_arithmetic() {
    const auto cfg = load_config(source_dir() / "configs/apu16.json");
    const auto t = cost::throughput(cfg, nullptr, 0.44);
    Outcome r;
    r.pass = t.ops_per_pe_cycle >= 1500 && t.ops_per_pe_cycle <= 1700 && t.peak_tops >= 15 && t.peak_tops <= 17 &&
             t.tops_per_watt >= 34 && t.tops_per_watt <= 39;
    r.detail = std::to_string(t.ops_per_pe_cycle) + " ops/PE-cycle, " + fmt("%.2f TOPS, ", t.peak_tops) +
               fmt("%.1f TOPS/W at 0.44 W", t.tops_per_watt);
    return r;
}

// 4 -------------------------------------------------------------------------
Outcome adder_tree() {
    const auto t0 = Clock::now();
    std::size_t cases = 0, bad = 0;
    auto check = [&](const std::vector<std::int64_t>& p) {
        std::int64_t seq = 0;
        for (auto v : p) seq += v;
        ++cases;
        if (sim::adder_tree_eval(p, 8) != seq) ++bad;
    };
    // Full operand space for n <= 2: every (weight, activation) pair per input.
    for (std::size_t n = 1; n <= 2; ++n) {
        const std::size_t combos = std::size_t{1} << (8 * n);
        std::vector<std::int64_t> p(n);
        for (std::size_t c = 0; c < combos; ++c) {
            for (std::size_t i = 0; i < n; ++i) {
                const auto w = static_cast<std::int64_t>((c >> (8 * i)) & 15) - 8;
                const auto a = static_cast<std::int64_t>((c >> (8 * i + 4)) & 15) - 8;
                p[i] = w * a;
            }
            check(p);
        }
    }
    // Every distinct 4x4-bit product at each input for n <= 4.
    std::set<std::int64_t> prod_set;
    for (int w = -8; w < 8; ++w)
        for (int a = -8; a < 8; ++a) prod_set.insert(w * a);
    const std::vector<std::int64_t> prods(prod_set.begin(), prod_set.end());
    for (std::size_t n = 3; n <= 4; ++n) {
        std::vector<std::size_t> idx(n, 0);
        std::vector<std::int64_t> p(n);
        while (true) {
            for (std::size_t i = 0; i < n; ++i) p[i] = prods[idx[i]];
            check(p);
            std::size_t k = 0;
            while (k < n && ++idx[k] == prods.size()) idx[k++] = 0;
            if (k == n) break;
        }
    }
    // Extremes and their neighbours at each input for n <= 8.
    const std::vector<std::int64_t> extremes{-56, -1, 0, 1, 64};
    for (std::size_t n = 5; n <= 8; ++n) {
        std::vector<std::size_t> idx(n, 0);
        std::vector<std::int64_t> p(n);
        while (true) {
            for (std::size_t i = 0; i < n; ++i) p[i] = extremes[idx[i]];
            check(p);
            std::size_t k = 0;
            while (k < n && ++idx[k] == extremes.size()) idx[k++] = 0;
            if (k == n) break;
        }
    }
    const std::size_t small_cases = cases;
    Rng rng(400);
    std::vector<std::int64_t> p(400);
    for (int t = 0; t < 10000; ++t) {
        for (auto& v : p) v = (static_cast<std::int64_t>(rng.below(16)) - 8) * (static_cast<std::int64_t>(rng.below(16)) - 8);
        check(p);
    }
    Outcome r;
    const std::size_t stages = sim::adder_stages(400);
    r.pass = stages == 9 && bad == 0;
    r.detail = "stages(400)=" + std::to_string(stages) + "; " + std::to_string(small_cases) +
               " small-n vectors (full operand space n<=2, full product space n<=4, extreme set n<=8) and 10000 "
               "random n=400 vectors, " +
               std::to_string(bad) + " mismatches, " + fmt("%.1f s", seconds_since(t0));
    return r;
}

// 5 -------------------------------------------------------------------------

// Smallest number of matchings that partition the edge multiset, by exhaustive search.
std::size_t brute_force_length(const std::vector<sched::Transfer>& edges) {
    std::vector<std::size_t> colour(edges.size(), 0);
    std::function<bool(std::size_t, std::size_t)> fit = [&](std::size_t i, std::size_t k) -> bool {
        if (i == edges.size()) return true;
        for (std::size_t c = 0; c < k; ++c) {
            bool ok = true;
            for (std::size_t j = 0; j < i && ok; ++j)
                if (colour[j] == c && (edges[j].source == edges[i].source || edges[j].dest == edges[i].dest)) ok = false;
            if (!ok) continue;
            colour[i] = c;
            if (fit(i + 1, k)) return true;
        }
        return false;
    };
    std::size_t k = 0;
    while (!fit(0, k)) ++k;
    return k;
}

Outcome scheduler_validity() {
    const auto t0 = Clock::now();
    Rng rng(555);
    std::size_t verified = 0, balanced = 0, balanced_opt = 0, small = 0, small_ok = 0, brute = 0, brute_ok = 0;
    std::string problem;
    for (int t = 0; t < 500; ++t) {
        const std::size_t n = 1 + rng.below(8);
        sched::RoutingDemand d{n, n, {}};
        std::uint64_t a = 0;
        if (t % 2 == 0) {
            // Regular demand: k rounds of random permutations, so every node has degree k.
            const std::size_t k = rng.below(64 / n + 1);
            for (std::size_t r = 0; r < k; ++r) {
                std::vector<std::uint32_t> perm(n);
                for (std::uint32_t i = 0; i < n; ++i) perm[i] = i;
                rng.shuffle(perm);
                for (std::uint32_t s = 0; s < n; ++s) d.triples.push_back({s, perm[s], a++});
            }
        } else {
            const std::size_t m = rng.below(65);
            for (std::size_t i = 0; i < m; ++i)
                d.triples.push_back({static_cast<std::uint32_t>(rng.below(n)), static_cast<std::uint32_t>(rng.below(n)), a++});
        }
        const auto s = sched::build_schedule(d);
        if (!sched::verify_schedule(d, s)) ++verified;
        else if (problem.empty()) problem = "verify failed on instance " + std::to_string(t);

        std::vector<std::size_t> out(n, 0), in(n, 0);
        for (const auto& tr : d.triples) ++out[tr.source], ++in[tr.dest];
        const std::size_t lstar = std::max(*std::max_element(out.begin(), out.end()), *std::max_element(in.begin(), in.end()));
        const bool is_balanced = std::all_of(out.begin(), out.end(), [&](auto v) { return v == out[0]; }) &&
                                 std::all_of(in.begin(), in.end(), [&](auto v) { return v == out[0]; });
        if (is_balanced) {
            ++balanced;
            if (s.length() == lstar) ++balanced_opt;
        }
        if (n <= 6) {
            ++small;
            bool legal = true;
            for (const auto& cyc : s.cycles)
                for (std::size_t i = 0; i < cyc.size(); ++i)
                    for (std::size_t j = i + 1; j < cyc.size(); ++j)
                        if (cyc[i].source == cyc[j].source || cyc[i].dest == cyc[j].dest) legal = false;
            if (legal) ++small_ok;
            if (d.triples.size() <= 10) {
                ++brute;
                if (brute_force_length(d.triples) == s.length()) ++brute_ok;
            }
        }
    }
    const double secs = seconds_since(t0);
    Outcome r;
    r.pass = verified == 500 && balanced_opt == balanced && small_ok == small && brute_ok == brute && secs < 30.0;
    r.detail = std::to_string(verified) + "/500 verified; L=L* on " + std::to_string(balanced_opt) + "/" +
               std::to_string(balanced) + " balanced; brute-force per-cycle legality " + std::to_string(small_ok) + "/" +
               std::to_string(small) + " (<=6 nodes), exhaustive optimum " + std::to_string(brute_ok) + "/" +
               std::to_string(brute) + "; " + fmt("%.2f s", secs) + (problem.empty() ? "" : "; " + problem);
    return r;
}

// 6 -------------------------------------------------------------------------
double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) mx += std::log(x[i]), my += std::log(y[i]);
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double num = 0, den = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        num += dx * (std::log(y[i]) - my);
        den += dx * dx;
    }
    return num / den;
}

Outcome cost_scaling() {
    const std::vector<double> dims{200, 256, 400, 512, 1024, 2048};
    std::vector<double> mem_e, mem_a, cmp_e, cmp_a;
    for (double d : dims) {
        const auto c = cost::pe_cost(static_cast<std::size_t>(d), static_cast<std::size_t>(d), 4, PeMode::Spatial);
        mem_e.push_back(c.energy.memory());
        mem_a.push_back(c.area.memory());
        cmp_e.push_back(c.energy.compute());
        cmp_a.push_back(c.area.compute());
    }
    const double sme = fit_slope(dims, mem_e), sma = fit_slope(dims, mem_a);
    const double sce = fit_slope(dims, cmp_e), sca = fit_slope(dims, cmp_a);
    const auto sw = cost::precision_sweep(400, 400, {4, 8, 16});
    const double r8 = std::abs(sw[1].energy.compute() - sw[1].energy.memory()) / sw[1].energy.memory();
    const double r16 = sw[2].energy.compute() / sw[2].energy.memory();
    const bool mem4 = sw[0].energy.memory() > sw[0].energy.compute();
    const double mshare = sw[0].energy.memory() / sw[0].energy.total();
    const double cshare = sw[0].energy.compute() / sw[0].energy.total();
    auto near = [](double v, double want) { return std::abs(v - want) <= 0.1; };
    Outcome r;
    r.pass = near(sme, 2) && near(sma, 2) && near(sce, 1) && near(sca, 1) && r8 <= 0.25 && r16 >= 2.1 && r16 <= 3.9 &&
             mem4 && mshare > 0.5 && cshare >= 0.15 && cshare <= 0.35;
    std::ostringstream os;
    os.precision(3);
    os << "slopes memory energy " << sme << " area " << sma << ", compute energy " << sce << " area " << sca
       << "; 8-bit |c-m|/m " << r8 << ", 16-bit c/m " << r16 << ", 4-bit memory>compute " << (mem4 ? "yes" : "no")
       << "; 400x400/4-bit shares memory " << mshare << " compute " << cshare;
    r.detail = os.str();
    return r;
}

// 7 -------------------------------------------------------------------------
Outcome interconnect_memory() {
    double lo = 1e300, hi = 0;
    for (std::size_t n = 512; n <= 4096; n += 64) {
        const double ratio = static_cast<double>(cost::interconnect_memory(Interconnect::Crossbar, n, 1)) /
                             static_cast<double>(cost::interconnect_memory(Interconnect::Mux, n, 1));
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
    }
    Rng rng(77);
    std::size_t match = 0;
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 1 + rng.below(16);
        sched::RoutingDemand d{n, n, {}};
        const std::size_t m = rng.below(200);
        for (std::uint64_t a = 0; a < m; ++a)
            d.triples.push_back({static_cast<std::uint32_t>(rng.below(n)), static_cast<std::uint32_t>(rng.below(n)), a});
        const auto s = sched::build_schedule(d);
        const auto table = sched::emit_selects(s, n, n);
        if (cost::interconnect_memory(Interconnect::Mux, n, s.length()) == table.storage_bits() &&
            table.select.size() == n * s.length())
            ++match;
    }
    Outcome r;
    r.pass = lo >= 10 && hi <= 1000 && match == 50;
    r.detail = fmt("crossbar/mux ratio over N in [512,4096]: %.1f", lo) + fmt(" to %.1f", hi) + "; mux formula equals " +
               "emitted select bits on " + std::to_string(match) + "/50 schedules";
    return r;
}

// 8 -------------------------------------------------------------------------
Outcome group_conv_mapping() {
    Outcome r;
    r.pass = true;
    std::ostringstream os;
    os.precision(3);
    const auto cfg = load_config(source_dir() / "configs/group_conv_513x9.json");
    for (const char* name : {"manifests/vgg19_group.json", "manifests/resnet50_group.json"}) {
        const auto cm = load_manifest(source_dir() / name, cfg, 1);
        const auto prog = mapper::map_model(cm, cfg, {false});
        const auto rep = sim::simulate_timing(prog);
        double conv_min = 1.0, pool_max = 0.0;
        std::size_t convs = 0, pools = 0;
        for (const auto& l : rep.layers) {
            if (l.kind == "conv") {
                conv_min = std::min(conv_min, l.compute_utilization);
                ++convs;
            } else if (l.kind == "pool") {
                pool_max = std::max(pool_max, l.compute_utilization);
                ++pools;
            }
        }
        const bool ok = convs > 0 && conv_min >= 0.95 && (pools == 0 || pool_max < conv_min);
        r.pass = r.pass && ok;
        os << fs::path(name).stem().string() << ": " << convs << " convs min utilization " << conv_min << ", " << pools
           << " pools max " << pool_max << "; ";
    }
    const auto fcfg = load_config(source_dir() / "configs/fc_compare_512x9.json");
    const auto fm = load_manifest(source_dir() / "manifests/fc_compare.json", fcfg, 1);
    const auto c = compare(fm, fcfg, BaselineSpec{});
    double min_speedup = 1e300;
    bool folded_lower = true, any_fold = false;
    for (const auto& l : c.layers) {
        min_speedup = std::min(min_speedup, l.speedup);
        if (l.folds > 1) {
            any_fold = true;
            folded_lower = folded_lower && l.unfolded_speedup && l.speedup < *l.unfolded_speedup;
        }
    }
    r.pass = r.pass && min_speedup >= 2.0 && any_fold && folded_lower;
    os << "FC comparison layers vs unstructured baseline: min speedup " << min_speedup << "x, folded layers "
       << (folded_lower ? "below" : "NOT below") << " their unfolded speedup";
    r.detail = os.str();
    return r;
}

// 9 -------------------------------------------------------------------------
Outcome desk_pruning() {
    const auto train = prune::make_spiral(300, 11, 0.06, 2.0);
    const auto test = prune::make_spiral(300, 12, 0.06, 2.0);
    const auto model = prune::make_mlp("spiral", {2, 64, 64, 2}, 3);
    prune::TrainOptions o;
    o.epochs = 300;
    o.learning_rate = 0.05;
    o.seed = 3;
    const auto dense = prune::train_structured(model, train, {}, nullptr, o);
    const auto mask = prune::generate_mask(64, 64, 4, 5);
    const auto bits = mask.dense_bits();
    std::size_t steps = 0, violations = 0;
    const auto masked = prune::train_structured(model, train, {{"fc2", mask}}, nullptr, o,
                                                [&](std::size_t, const std::vector<const std::vector<double>*>& w) {
                                                    ++steps;
                                                    for (std::size_t i = 0; i < bits.size(); ++i)
                                                        if (!bits[i] && (*w[1])[i] != 0.0) ++violations;
                                                });
    const double da = prune::accuracy(dense.model, test), ma = prune::accuracy(masked.model, test);
    Outcome r;
    r.pass = ma >= da - 0.03 && violations == 0 && steps > 0;
    r.detail = "two-turn spiral 2-64-64-2, 4-block mask on the 64x64 layer: held-out accuracy " + fmt("%.3f", ma) + " vs dense " +
               fmt("%.3f", da) + "; mask checked after " + std::to_string(steps) + " steps, " + std::to_string(violations) +
               " violations";
    return r;
}

// 10 ------------------------------------------------------------------------
Outcome determinism() {
    std::size_t compared = 0, identical = 0;
    const std::vector<std::pair<const char*, const char*>> runs{{"models/lenet300.json", "configs/apu16.json"},
                                                                {"manifests/vgg19_group.json", "configs/group_conv_513x9.json"}};
    for (const auto& [model, cfg] : runs) {
        std::vector<fs::path> dirs;
        for (int k = 0; k < 2; ++k) {
            const fs::path d = fs::temp_directory_path() / ("apu_acceptance_det" + std::to_string(k));
            fs::remove_all(d);
            PipelineOptions o;
            o.model = source_dir() / model;
            o.config = source_dir() / cfg;
            o.compress.seed = 9;
            o.out_dir = d;
            o.trace = true;
            run_pipeline(o);
            dirs.push_back(d);
        }
        for (const auto& e : fs::directory_iterator(dirs[0])) {
            if (e.path().extension() != ".json") continue;
            ++compared;
            if (read_file(e.path()) == read_file(dirs[1] / e.path().filename())) ++identical;
        }
        for (const auto& d : dirs) fs::remove_all(d);
    }
    Outcome r;
    r.pass = compared > 0 && identical == compared;
    r.detail = std::to_string(identical) + "/" + std::to_string(compared) + " JSON reports byte-identical across two runs";
    return r;
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, Outcome (*)()>> criteria{
        {"functional oracle equivalence", functional_oracle},
        {"400-cycle layer", four_hundred_cycles},
        {"throughput arithmetic", throughput_arithmetic},
        {"adder tree", adder_tree},
        {"scheduler validity", scheduler_validity},
        {"cost-model scaling", cost_scaling},
        {"interconnect memory", interconnect_memory},
        {"group-conv mapping and structured speedup", group_conv_mapping},
        {"desk-scale pruning", desk_pruning},
        {"determinism", determinism},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("error: ") + e.what();
        }
        failures += !o.pass;
        std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
