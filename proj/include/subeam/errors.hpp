// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the subeam authors. See LICENSE for terms.

#pragma once

#include <stdexcept>
#include <string>

namespace subeam {

// Base class for all errors raised by this library.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid configuration, parameters, or usage. CLI exit code 2.
class config_error : public error {
public:
    using error::error;
};

// Malformed, truncated, or unreadable files. CLI exit code 3.
class io_error : public error {
public:
    using error::error;
};

// Inconsistent data shapes or index coverage at runtime. CLI exit code 3.
class structural_error : public error {
public:
    using error::error;
};

} // namespace subeam
