// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#include "sdist/diffgrad/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "sdist/common/error.hpp"

namespace sdist {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
  require(data.size() == r * c, ErrorKind::kContract, "Matrix: value count does not match shape");
}

Matrix Matrix::row(std::span<const double> values) {
  return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

bool Matrix::all_finite() const {
  return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices) {
  Matrix out(indices.size(), m.cols);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] < m.rows, ErrorKind::kContract, "gather_rows: index out of range");
    std::copy_n(m.data.begin() + static_cast<std::ptrdiff_t>(indices[i] * m.cols), m.cols,
                out.data.begin() + static_cast<std::ptrdiff_t>(i * m.cols));
  }
  return out;
}

}  // namespace sdist
