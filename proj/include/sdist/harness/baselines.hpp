// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "sdist/boundary/memory.hpp"
#include "sdist/datastream/records.hpp"
#include "sdist/recmodel/model.hpp"

namespace sdist::harness {

/// ceil(ratio * n), robust to ratio * n landing a hair above an integer.
std::size_t ratio_count(double ratio, std::size_t n);

/// Per block: record indices, ascending.
using Selection = std::vector<std::vector<std::size_t>>;

Selection baseline_random(std::span<const data::DataBlock> blocks, double ratio, std::uint64_t seed);

/// Rank range [first, last) of the percentile band centred on the 90th
/// percentile with ratio_count(ratio, n) members.
std::pair<std::size_t, std::size_t> el2n_band(std::size_t n, double ratio);

/// `checkpoints[t]` scores block t (so pass phi_1..phi_T).
Selection baseline_el2n(std::span<const data::DataBlock> blocks, std::span<const model::ModelCheckpoint> checkpoints,
                        double ratio);

struct KMeansResult {
  Matrix centroids;                 // k x D
  std::vector<std::size_t> assign;  // per point
  std::vector<double> objective;    // after each assignment pass
  std::size_t iterations = 0;
};

/// k-means++ seeding followed by up to `iterations` Lloyd passes.
KMeansResult kmeans(const Matrix& points, std::size_t k, std::size_t iterations, std::uint64_t seed);

/// For each centroid in order, the nearest not-yet-chosen point.
std::vector<std::size_t> nearest_to_centroids(const Matrix& points, const Matrix& centroids);

Selection baseline_kmeans(std::span<const data::DataBlock> blocks, std::span<const model::ModelCheckpoint> checkpoints,
                          double ratio, std::size_t iterations, std::uint64_t seed);

/// Embedding/soft-label samples of each block's selection under that block's checkpoint.
std::vector<boundary::SyntheticMemory> selection_to_memory(std::span<const data::DataBlock> blocks,
                                                           std::span<const model::ModelCheckpoint> checkpoints,
                                                           const Selection& selection);

}  // namespace sdist::harness
