// Copyright (c) 2026, The Sumshine Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace sumshine {

/// Bad or inconsistent user configuration. CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file (triple file, label file, type file). Exit code 2.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  explicit ParseError(const std::string& what) : std::runtime_error(what), line_(0) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Corrupt or incompatible binary artifact.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// NaN/Inf in a loss or gradient.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A source cannot be sampled (no edges, or fewer than two entities to corrupt with).
class SamplerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace sumshine
