// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sdist/diffgrad/autograd.hpp"
#include "sdist/diffgrad/matrix.hpp"

namespace sdist {

struct Segment {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;
  std::size_t size() const { return rows * cols; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Flat float64 parameter storage with a named, ordered segment layout.
class ParamVector {
 public:
  ParamVector() = default;

  /// Appends a zero-filled segment; duplicate names are contract errors.
  std::size_t add_segment(std::string name, std::size_t rows, std::size_t cols);

  const std::vector<Segment>& layout() const { return layout_; }
  std::size_t segment_count() const { return layout_.size(); }
  std::size_t size() const { return values_.size(); }
  std::size_t index_of(const std::string& name) const;

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<double> segment(std::size_t i);
  std::span<const double> segment(std::size_t i) const;

  Matrix segment_matrix(std::size_t i) const;
  void set_segment(std::size_t i, const Matrix& m);

  bool same_layout(const ParamVector& other) const { return layout_ == other.layout_; }
  ParamVector zeros_like() const;

  /// One Var per segment.
  std::vector<ad::Var> to_vars(bool requires_grad) const;
  /// Copies values out of per-segment Vars with this layout.
  ParamVector with_values(std::span<const ad::Var> vars) const;

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<Segment> layout_;
  std::vector<double> values_;
};

double dot(const ParamVector& a, const ParamVector& b);

}  // namespace sdist
