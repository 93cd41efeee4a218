// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace gcnn {

enum class ErrorKind {
    Usage,
    Parameter,
    Range,
    Shape,
    Format,
    Io,
    NoiseExhausted,
};

const char* to_string(ErrorKind kind) noexcept;

/// Single exception type for the library; `kind()` classifies the failure.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace gcnn
