// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <sstream>
#include <string>

namespace apu::log {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

// Threshold comes from APU_LOG (error|warn|info|debug), default warn.
Level threshold();
void emit(Level level, const std::string& msg);

template <class... Args>
void write(Level level, const Args&... args) {
    if (static_cast<int>(level) > static_cast<int>(threshold())) return;
    std::ostringstream os;
    (os << ... << args);
    emit(level, os.str());
}

template <class... Args> void info(const Args&... a) { write(Level::Info, a...); }
template <class... Args> void warn(const Args&... a) { write(Level::Warn, a...); }
template <class... Args> void debug(const Args&... a) { write(Level::Debug, a...); }

}  // namespace apu::log
