// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#include "apu/scheduler.hpp"

#include <algorithm>
#include <deque>
#include <istream>
#include <ostream>
#include <map>
#include <set>
#include <tuple>

#include "apu/error.hpp"

namespace apu::sched {

void RoutingDemand::validate() const {
    if (num_sources == 0 || num_dests == 0) throw InputError("routing demand needs at least one source and one dest");
    if (num_sources >= SelectTable::kIdle) throw InputError("too many sources for a 16-bit select table");
    std::set<std::tuple<std::uint32_t, std::uint32_t, std::uint64_t>> seen;
    for (const auto& t : triples) {
        if (t.source >= num_sources || t.dest >= num_dests)
            throw InputError("routing triple (" + std::to_string(t.source) + "," + std::to_string(t.dest) + "," +
                             std::to_string(t.activation) + ") out of range");
        if (!seen.emplace(t.source, t.dest, t.activation).second)
            throw InputError("duplicate routing triple (" + std::to_string(t.source) + "," + std::to_string(t.dest) + "," +
                             std::to_string(t.activation) + ")");
    }
}

std::size_t RoutingSchedule::transfers() const {
    std::size_t n = 0;
    for (const auto& c : cycles) n += c.size();
    return n;
}

std::size_t lower_bound(const RoutingDemand& d) {
    std::vector<std::size_t> snd(d.num_sources, 0), rcv(d.num_dests, 0);
    for (const auto& t : d.triples) {
        ++snd.at(t.source);
        ++rcv.at(t.dest);
    }
    std::size_t l = 0;
    for (auto v : snd) l = std::max(l, v);
    for (auto v : rcv) l = std::max(l, v);
    return l;
}

namespace {

// Bipartite multigraph padded to a square, degree-regular one. Left = sources,
// right = dests; real[s][d] counts remaining triples, pad[s][d] dummy edges.
class Matcher {
public:
    explicit Matcher(std::size_t n) : n_(n), adj_(n), match_l_(n), match_r_(n), seen_(n) {}

    void reset(const std::vector<std::vector<std::size_t>>& real, const std::vector<std::vector<std::size_t>>& pad) {
        for (std::size_t s = 0; s < n_; ++s) {
            adj_[s].clear();
            for (std::size_t d = 0; d < n_; ++d)
                if (real[s][d] || pad[s][d]) adj_[s].push_back(d);
        }
        std::fill(match_l_.begin(), match_l_.end(), kNone);
        std::fill(match_r_.begin(), match_r_.end(), kNone);
    }

    void seed(std::size_t s, std::size_t d) {
        match_l_[s] = d;
        match_r_[d] = s;
    }

    void complete() {
        for (std::size_t s = 0; s < n_; ++s) {
            if (match_l_[s] != kNone || adj_[s].empty()) continue;
            std::fill(seen_.begin(), seen_.end(), false);
            augment(s);
        }
    }

    std::size_t partner(std::size_t s) const { return match_l_[s]; }

    static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

private:
    bool augment(std::size_t s) {
        for (std::size_t d : adj_[s]) {
            if (seen_[d]) continue;
            seen_[d] = true;
            if (match_r_[d] == kNone || augment(match_r_[d])) {
                match_l_[s] = d;
                match_r_[d] = s;
                return true;
            }
        }
        return false;
    }

    std::size_t n_;
    std::vector<std::vector<std::size_t>> adj_;
    std::vector<std::size_t> match_l_, match_r_;
    std::vector<bool> seen_;
};

}  // namespace

RoutingSchedule build_schedule(const RoutingDemand& demand) {
    demand.validate();
    const std::size_t NS = demand.num_sources, ND = demand.num_dests, N = std::max(NS, ND);

    std::vector<std::vector<std::deque<std::uint64_t>>> queue(NS, std::vector<std::deque<std::uint64_t>>(ND));
    std::vector<std::vector<std::size_t>> rem(N, std::vector<std::size_t>(N, 0));
    for (const auto& t : demand.triples) {
        queue[t.source][t.dest].push_back(t.activation);
        ++rem[t.source][t.dest];
    }
    std::vector<std::size_t> out_deg(N, 0), in_deg(N, 0);
    for (const auto& t : demand.triples) {
        ++out_deg[t.source];
        ++in_deg[t.dest];
    }
    std::size_t remaining = demand.triples.size();

    RoutingSchedule sched;
    std::vector<std::vector<std::size_t>> pad(N, std::vector<std::size_t>(N, 0));
    Matcher matcher(N);
    std::vector<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>> pairs;  // (rem, rotated s, rotated d, s*N+d)
    std::size_t rotate = 0;

    while (remaining) {
        std::size_t delta = 0;
        for (std::size_t i = 0; i < N; ++i) delta = std::max({delta, out_deg[i], in_deg[i]});

        // Pad deficits with dummy edges so every node has degree delta.
        for (auto& row : pad) std::fill(row.begin(), row.end(), 0);
        {
            std::size_t s = 0, d = 0;
            std::vector<std::size_t> ls(N), rd(N);
            for (std::size_t i = 0; i < N; ++i) {
                ls[i] = delta - out_deg[i];
                rd[i] = delta - in_deg[i];
            }
            while (s < N && d < N) {
                if (!ls[s]) {
                    ++s;
                    continue;
                }
                if (!rd[d]) {
                    ++d;
                    continue;
                }
                const std::size_t k = std::min(ls[s], rd[d]);
                pad[s][d] += k;
                ls[s] -= k;
                rd[d] -= k;
            }
        }

        // Greedy seed: heaviest (source, dest) pairs first, rotating ties.
        pairs.clear();
        for (std::size_t s = 0; s < NS; ++s)
            for (std::size_t d = 0; d < ND; ++d)
                if (rem[s][d]) pairs.emplace_back(rem[s][d], (s + N - rotate % N) % N, (d + N - rotate % N) % N, s * N + d);
        std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
            if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
            return std::tie(std::get<1>(a), std::get<2>(a)) < std::tie(std::get<1>(b), std::get<2>(b));
        });
        matcher.reset(rem, pad);
        std::vector<bool> s_used(N, false), d_used(N, false);
        for (const auto& p : pairs) {
            const std::size_t s = std::get<3>(p) / N, d = std::get<3>(p) % N;
            if (s_used[s] || d_used[d]) continue;
            s_used[s] = d_used[d] = true;
            matcher.seed(s, d);
        }
        // Augmenting paths may displace greedy picks; they never unmatch a node.
        matcher.complete();

        std::vector<Transfer> cycle;
        for (std::size_t s = 0; s < NS; ++s) {
            const std::size_t d = matcher.partner(s);
            if (d == Matcher::kNone || d >= ND || !rem[s][d]) continue;
            cycle.push_back({static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(d), queue[s][d].front()});
            queue[s][d].pop_front();
            --rem[s][d];
            --out_deg[s];
            --in_deg[d];
            --remaining;
        }
        if (cycle.empty()) throw InternalError("scheduler made no progress");
        std::sort(cycle.begin(), cycle.end(), [](const Transfer& a, const Transfer& b) { return a.dest < b.dest; });
        sched.cycles.push_back(std::move(cycle));
        ++rotate;
    }
    return sched;
}

std::optional<Violation> verify_schedule(const RoutingDemand& demand, const RoutingSchedule& sched) {
    std::set<std::tuple<std::uint32_t, std::uint32_t, std::uint64_t>> want, got;
    for (const auto& t : demand.triples) want.emplace(t.source, t.dest, t.activation);
    for (std::size_t c = 0; c < sched.cycles.size(); ++c) {
        std::set<std::uint32_t> srcs, dsts;
        for (const auto& t : sched.cycles[c]) {
            const auto key = std::make_tuple(t.source, t.dest, t.activation);
            const std::string tag = "(" + std::to_string(t.source) + "," + std::to_string(t.dest) + "," +
                                    std::to_string(t.activation) + ")";
            if (!want.count(key)) return Violation{c, "transfer " + tag + " is not in the demand"};
            if (!got.insert(key).second) return Violation{c, "transfer " + tag + " delivered twice"};
            if (!srcs.insert(t.source).second)
                return Violation{c, "source " + std::to_string(t.source) + " drives two transfers"};
            if (!dsts.insert(t.dest).second)
                return Violation{c, "dest " + std::to_string(t.dest) + " receives two transfers"};
        }
    }
    for (const auto& t : demand.triples)
        if (!got.count({t.source, t.dest, t.activation}))
            return Violation{sched.cycles.size(), "transfer (" + std::to_string(t.source) + "," + std::to_string(t.dest) +
                                                      "," + std::to_string(t.activation) + ") undelivered"};
    // Within one (source, dest) pair values must arrive in demand order.
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<std::uint64_t>> expect, seen;
    for (const auto& t : demand.triples) expect[{t.source, t.dest}].push_back(t.activation);
    for (std::size_t c = 0; c < sched.cycles.size(); ++c)
        for (const auto& t : sched.cycles[c]) {
            auto& v = seen[{t.source, t.dest}];
            v.push_back(t.activation);
            const auto& e = expect[{t.source, t.dest}];
            if (e[v.size() - 1] != t.activation)
                return Violation{c, "pair (" + std::to_string(t.source) + "," + std::to_string(t.dest) + ") receives " +
                                        std::to_string(t.activation) + " out of order"};
        }
    return std::nullopt;
}

std::size_t SelectTable::idle_slots() const {
    return static_cast<std::size_t>(std::count(select.begin(), select.end(), kIdle));
}

unsigned select_width(std::size_t num_sources) {
    unsigned w = 0;
    while ((std::size_t{1} << w) < num_sources) ++w;
    return std::max(1u, w);
}

SelectTable emit_selects(const RoutingSchedule& sched, std::size_t num_sources, std::size_t num_dests) {
    SelectTable t;
    t.num_sources = num_sources;
    t.num_dests = num_dests;
    t.length = sched.length();
    t.width = select_width(num_sources);
    t.select.assign(num_dests * t.length, SelectTable::kIdle);
    for (std::size_t c = 0; c < t.length; ++c)
        for (const auto& x : sched.cycles[c]) {
            if (x.dest >= num_dests || x.source >= num_sources) throw InputError("schedule references an unknown port");
            t.select[x.dest * t.length + c] = static_cast<std::uint16_t>(x.source);
        }
    return t;
}

void write_schedule_csv(std::ostream& os, const RoutingSchedule& sched, bool header) {
    if (header) os << "cycle,source,dest,activation_index\n";
    for (std::size_t c = 0; c < sched.cycles.size(); ++c)
        for (const auto& t : sched.cycles[c]) os << c << ',' << t.source << ',' << t.dest << ',' << t.activation << '\n';
}

namespace {

void put32(std::ostream& os, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 4);
}

std::uint32_t get32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw InputError("select table truncated");
    return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_select_table(std::ostream& os, const SelectTable& t) {
    os.write("APUS", 4);
    put32(os, 1);
    put32(os, static_cast<std::uint32_t>(t.num_sources));
    put32(os, static_cast<std::uint32_t>(t.num_dests));
    put32(os, static_cast<std::uint32_t>(t.length));
    put32(os, t.width);
    for (auto v : t.select) {
        const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
        os.write(b, 2);
    }
}

SelectTable read_select_table(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::string(magic, 4) != "APUS") throw InputError("not a select table (bad magic)");
    if (get32(is) != 1) throw InputError("unsupported select table version");
    SelectTable t;
    t.num_sources = get32(is);
    t.num_dests = get32(is);
    t.length = get32(is);
    t.width = get32(is);
    t.select.resize(t.num_dests * t.length);
    for (auto& v : t.select) {
        unsigned char b[2];
        if (!is.read(reinterpret_cast<char*>(b), 2)) throw InputError("select table truncated");
        v = static_cast<std::uint16_t>(b[0] | (b[1] << 8));
    }
    return t;
}

}  // namespace apu::sched
