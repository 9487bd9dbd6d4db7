// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#include "apu/log.hpp"

#include <cstdlib>
#include <iostream>
#include <string_view>

namespace apu::log {

Level threshold() {
    static const Level level = [] {
        const char* env = std::getenv("APU_LOG");
        if (!env) return Level::Warn;
        std::string_view v(env);
        if (v == "error") return Level::Error;
        if (v == "info") return Level::Info;
        if (v == "debug") return Level::Debug;
        return Level::Warn;
    }();
    return level;
}

void emit(Level level, const std::string& msg) {
    static const char* tags[] = {"error", "warn", "info", "debug"};
    std::cerr << "[apu " << tags[static_cast<int>(level)] << "] " << msg << '\n';
}

}  // namespace apu::log
