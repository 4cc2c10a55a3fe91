// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>

namespace mgtd {

/// Malformed or inconsistent input data (JSONL lines, labels, token ids).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor dimensions that do not agree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid configuration: unknown variant, impossible freeze spec, bad search space.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A checkpoint or embedding container that fails validation.
class CorruptionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A container written by an unknown format version.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mgtd
