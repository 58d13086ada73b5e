// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sdist {

enum class ErrorKind {
  kNumerical,
  kContract,
  kDivergence,
  kParse,
  kSchema,
  kFormat,
  kLayout,
  kConfig,
  kUndefinedMetric,
  kUnsupportedArchitecture,
  kIo,
};

std::string_view error_kind_name(ErrorKind kind);

/// Single exception type for the library; the kind is machine-readable and
/// is what the CLI reports in its error JSON.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) throw Error(kind, message);
}

}  // namespace sdist
