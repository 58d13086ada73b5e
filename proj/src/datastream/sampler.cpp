// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#include "sdist/datastream/sampler.hpp"

#include <algorithm>
#include <numeric>

#include "sdist/common/error.hpp"
#include "sdist/common/rng.hpp"

namespace sdist::data {

MinibatchSampler::MinibatchSampler(std::size_t population, std::size_t batch_size, std::uint64_t seed)
    : population_(population), batch_size_(batch_size), seed_(seed) {
  require(batch_size >= 1, ErrorKind::kContract, "batch size must be >= 1");
}

std::vector<std::vector<std::size_t>> MinibatchSampler::epoch(std::size_t epoch_index) const {
  std::vector<std::size_t> perm(population_);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(derive_seed(seed_, {0xe90c, epoch_index}));
  rng.shuffle(perm);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < population_; i += batch_size_) {
    const std::size_t end = std::min(population_, i + batch_size_);
    out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(i), perm.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

std::vector<std::size_t> MinibatchSampler::draw(std::size_t draw_index) const {
  Rng rng(derive_seed(seed_, {0xd4a3, draw_index}));
  return sample_without_replacement(population_, std::min(batch_size_, population_), rng);
}

}  // namespace sdist::data
