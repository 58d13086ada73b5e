// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#include "sdist/diffgrad/param_vector.hpp"

#include <algorithm>

#include "sdist/common/error.hpp"
#include "sdist/simd/kernels.hpp"

namespace sdist {

std::size_t ParamVector::add_segment(std::string name, std::size_t rows, std::size_t cols) {
  for (const auto& s : layout_) require(s.name != name, ErrorKind::kContract, "duplicate segment name: " + name);
  layout_.push_back(Segment{std::move(name), rows, cols, values_.size()});
  values_.resize(values_.size() + rows * cols, 0.0);
  return layout_.size() - 1;
}

std::size_t ParamVector::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < layout_.size(); ++i) {
    if (layout_[i].name == name) return i;
  }
  fail(ErrorKind::kContract, "no segment named " + name);
}

std::span<double> ParamVector::segment(std::size_t i) {
  const auto& s = layout_.at(i);
  return {values_.data() + s.offset, s.size()};
}

std::span<const double> ParamVector::segment(std::size_t i) const {
  const auto& s = layout_.at(i);
  return {values_.data() + s.offset, s.size()};
}

Matrix ParamVector::segment_matrix(std::size_t i) const {
  const auto& s = layout_.at(i);
  auto seg = segment(i);
  return Matrix(s.rows, s.cols, std::vector<double>(seg.begin(), seg.end()));
}

void ParamVector::set_segment(std::size_t i, const Matrix& m) {
  const auto& s = layout_.at(i);
  require(m.rows == s.rows && m.cols == s.cols, ErrorKind::kContract, "set_segment: shape mismatch for " + s.name);
  std::copy(m.data.begin(), m.data.end(), values_.begin() + static_cast<std::ptrdiff_t>(s.offset));
}

ParamVector ParamVector::zeros_like() const {
  ParamVector out = *this;
  std::fill(out.values_.begin(), out.values_.end(), 0.0);
  return out;
}

std::vector<ad::Var> ParamVector::to_vars(bool requires_grad) const {
  std::vector<ad::Var> out;
  out.reserve(layout_.size());
  for (std::size_t i = 0; i < layout_.size(); ++i) out.emplace_back(segment_matrix(i), requires_grad);
  return out;
}

ParamVector ParamVector::with_values(std::span<const ad::Var> vars) const {
  require(vars.size() == layout_.size(), ErrorKind::kContract, "with_values: segment count mismatch");
  ParamVector out = *this;
  for (std::size_t i = 0; i < vars.size(); ++i) out.set_segment(i, vars[i].value());
  return out;
}

double dot(const ParamVector& a, const ParamVector& b) {
  require(a.size() == b.size(), ErrorKind::kContract, "dot: size mismatch");
  return simd::kernels().dot(a.size(), a.values().data(), b.values().data());
}

}  // namespace sdist
