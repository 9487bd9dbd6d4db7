// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace apu {

// Base of everything the toolchain throws on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad user input: malformed files, inconsistent shapes, impossible configs.
class InputError : public Error {
public:
    using Error::Error;
};

class ParseError : public InputError {
public:
    ParseError(const std::string& what, std::size_t line, std::size_t column)
        : InputError(what + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")"),
          line_(line),
          column_(column) {}
    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

class ShapeError : public InputError {
public:
    using InputError::InputError;
};

class CapacityError : public InputError {
public:
    using InputError::InputError;
};

class ChecksumError : public InputError {
public:
    using InputError::InputError;
};

class TrainingDiverged : public Error {
public:
    using Error::Error;
};

// Internal invariant broken; a bug in the toolchain, never the user's fault.
class InternalError : public Error {
public:
    using Error::Error;
};

// Simulator hard fault, tagged with the cycle it was detected in.
class SimFault : public InternalError {
public:
    SimFault(const std::string& what, std::size_t cycle)
        : InternalError("cycle " + std::to_string(cycle) + ": " + what), cycle_(cycle) {}
    std::size_t cycle() const { return cycle_; }

private:
    std::size_t cycle_;
};

}  // namespace apu
