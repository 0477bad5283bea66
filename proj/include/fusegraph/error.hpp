// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace fusegraph {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dimension or layout mismatch between tensors or graph values.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid user-supplied configuration (head counts, beam widths, recipes).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// File-format violations: bad magic, version, truncated or out-of-bounds blob.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Runtime failures while executing a graph (missing inputs, kernel errors).
class ExecError : public Error {
 public:
  using Error::Error;
};

// Non-finite values where finite input is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace fusegraph
