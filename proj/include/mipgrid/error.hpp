// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace mipgrid {

// Bad configuration or command-line usage. The CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File system and format failures (missing files, malformed JSON/PNG,
// checkpoint version mismatch).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A loss or gradient became non-finite during training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mipgrid
