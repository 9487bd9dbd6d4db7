// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace apu::sched {

struct Transfer {
    std::uint32_t source = 0;
    std::uint32_t dest = 0;
    std::uint64_t activation = 0;

    bool operator==(const Transfer&) const = default;
};

// Triples are listed in the order each destination consumes them.
struct RoutingDemand {
    std::size_t num_sources = 0;
    std::size_t num_dests = 0;
    std::vector<Transfer> triples;

    void validate() const;
};

struct RoutingSchedule {
    std::vector<std::vector<Transfer>> cycles;

    std::size_t length() const { return cycles.size(); }
    std::size_t transfers() const;
    bool operator==(const RoutingSchedule&) const = default;
};

// L* = max(max_s sends(s), max_d receives(d)).
std::size_t lower_bound(const RoutingDemand& demand);

// Cycle by cycle: a greedy matching over (source, dest) pairs in descending
// order of remaining demand (rotating priority among ties), completed with
// augmenting paths so that every node of maximum remaining degree is served.
// That keeps the schedule at exactly L* cycles for every demand.
RoutingSchedule build_schedule(const RoutingDemand& demand);

struct Violation {
    std::size_t cycle = 0;
    std::string message;
};

std::optional<Violation> verify_schedule(const RoutingDemand& demand, const RoutingSchedule& sched);

struct SelectTable {
    static constexpr std::uint16_t kIdle = 0xFFFF;

    std::size_t num_sources = 0;
    std::size_t num_dests = 0;
    std::size_t length = 0;
    unsigned width = 1;                 // bits per entry, ceil(log2 N_s), at least 1
    std::vector<std::uint16_t> select;  // [dest * length + cycle]

    std::uint16_t at(std::size_t dest, std::size_t cycle) const { return select[dest * length + cycle]; }
    std::size_t storage_bits() const { return num_dests * length * width; }
    std::size_t idle_slots() const;
    bool operator==(const SelectTable&) const = default;
};

unsigned select_width(std::size_t num_sources);
SelectTable emit_selects(const RoutingSchedule& sched, std::size_t num_sources, std::size_t num_dests);

void write_schedule_csv(std::ostream& os, const RoutingSchedule& sched, bool header = true);
// Binary record: "APUS", u32 version, u32 N_s, u32 N_d, u32 L, u32 width,
// then N_d*L little-endian u16 entries (dest-major), 0xFFFF = idle.
void write_select_table(std::ostream& os, const SelectTable& t);
SelectTable read_select_table(std::istream& is);

}  // namespace apu::sched
