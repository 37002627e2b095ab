// Copyright 2026 The pemsurv Authors. All Rights Reserved.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pemsurv {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A required column or configuration key is missing or malformed.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// A single input row failed validation. `row()` is the 1-based data row
/// index (header excluded).
class RowError : public Error {
public:
    RowError(std::size_t row, const std::string& what)
        : Error("row " + std::to_string(row) + ": " + what), row_(row) {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

/// Invalid numeric argument or parameter.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Cut-points do not cover the follow-up of the data being transformed.
class CoverageError : public Error {
public:
    using Error::Error;
};

/// Iterative fitting failed to converge.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

}  // namespace pemsurv
