// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

namespace sdist::data {

/// Uniform mini-batches without replacement within an epoch. The permutation
/// of epoch e depends only on (seed, e).
class MinibatchSampler {
 public:
  MinibatchSampler(std::size_t population, std::size_t batch_size, std::uint64_t seed);

  std::vector<std::vector<std::size_t>> epoch(std::size_t epoch_index) const;
  /// A single batch drawn for draw index `draw` (for per-iteration sampling).
  std::vector<std::size_t> draw(std::size_t draw_index) const;

  std::size_t population() const { return population_; }
  std::size_t batch_size() const { return batch_size_; }

 private:
  std::size_t population_;
  std::size_t batch_size_;
  std::uint64_t seed_;
};

}  // namespace sdist::data
