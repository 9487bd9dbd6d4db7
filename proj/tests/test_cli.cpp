// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "apu/digest.hpp"
#include "apu/json_io.hpp"
#include "doctest.h"
#include "support.hpp"

namespace fs = std::filesystem;
using apu::read_file;
using apu::testing::source_dir;

namespace {

struct Run {
    int code = -1;
    std::string out, err;
};

Run cli(const std::string& args) {
    const fs::path dir = fs::temp_directory_path() / "apu_cli_test";
    fs::create_directories(dir);
    const std::string cmd = std::string(APU_CLI) + " " + args + " >" + (dir / "out").string() + " 2>" +
                            (dir / "err").string();
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_file(dir / "out");
    r.err = read_file(dir / "err");
    return r;
}

std::string src(const char* rel) { return (source_dir() / rel).string(); }

}  // namespace

TEST_CASE("help and version exit cleanly") {
    CHECK(cli("--help").code == 0);
    const auto v = cli("--version");
    CHECK(v.code == 0);
    CHECK(v.out.find("0.1.0") != std::string::npos);
}

TEST_CASE("bad usage exits with 2") {
    CHECK(cli("nonsense").code == 2);
    CHECK(cli("pipeline --model x.json").code == 2);
}

TEST_CASE("a missing config exits with 2 and names the path") {
    const auto r = cli("pipeline --model " + src("models/lenet300.json") + " --config /nope/missing.json --out-dir " +
                       (fs::temp_directory_path() / "apu_cli_missing").string());
    CHECK(r.code == 2);
    CHECK(r.err.find("/nope/missing.json") != std::string::npos);
}

TEST_CASE("a corrupted container fails its checksum") {
    const fs::path apu = fs::temp_directory_path() / "apu_cli_lenet.apu";
    REQUIRE(cli("compress --model " + src("models/lenet300.json") + " --out " + apu.string()).code == 0);
    auto bytes = read_file(apu);
    bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x11);
    apu::write_file(apu, bytes);
    const auto r = cli("simulate --program " + apu.string() + " --config " + src("configs/apu16.json"));
    CHECK(r.code == 2);
    CHECK(r.err.find("checksum") != std::string::npos);
    fs::remove(apu);
}

TEST_CASE("pipeline reports are byte-identical across runs") {
    const auto a = fs::temp_directory_path() / "apu_cli_pa", b = fs::temp_directory_path() / "apu_cli_pb";
    fs::remove_all(a);
    fs::remove_all(b);
    const std::string base = "pipeline --model " + src("models/lenet300.json") + " --config " + src("configs/apu16.json") +
                             " --seed 7 --trace --out-dir ";
    REQUIRE(cli(base + a.string()).code == 0);
    REQUIRE(cli(base + b.string()).code == 0);
    for (const char* f : {"sim_report.json", "cost_report.json", "manifest.json", "sim_trace.csv", "schedule.csv"}) {
        INFO(f);
        CHECK(read_file(a / f) == read_file(b / f));
    }
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("compare against itself reports unit speedup") {
    const auto r = cli("compare --model " + src("manifests/fc_compare.json") + " --config " + src("configs/fc_compare_512x9.json") +
                       " --baseline apu --format csv");
    REQUIRE(r.code == 0);
    CHECK(r.out.find(",1,") != std::string::npos);
}

TEST_CASE("scheduling a demand file") {
    const fs::path d = fs::temp_directory_path() / "apu_cli_demand.csv";
    apu::write_file(d, "source,dest,activation\n0,0,0\n0,1,1\n1,0,2\n1,1,3\n");
    const auto r = cli("schedule --format csv --demand " + d.string());
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("cycle,source,dest,activation_index\n", 0) == 0);
    fs::remove(d);
}

TEST_CASE("cost and sweep subcommands") {
    const auto c = cli("cost --config " + src("configs/apu16.json"));
    REQUIRE(c.code == 0);
    const auto j = apu::parse_json(c.out, "cost");
    CHECK(j.at("pe").contains("energy_per_cycle"));
    const auto s = cli("sweep --spec " + src("configs/sweep.json") + " --jobs 2");
    CHECK(s.code == 0);
    CHECK(s.out.find("block") != std::string::npos);
}
