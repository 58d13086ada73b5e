// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#include "sdist/harness/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sdist/boundary/init.hpp"
#include "sdist/common/error.hpp"
#include "sdist/common/rng.hpp"
#include "sdist/simd/kernels.hpp"

namespace sdist::harness {
namespace {

void check_ratio(double ratio) {
  require(ratio > 0.0 && ratio <= 1.0, ErrorKind::kConfig, "selection ratio must be in (0, 1]");
}

// Squared distances (n x k) via |x|^2 - 2 x.c + |c|^2.
Matrix squared_distances(const Matrix& x, const Matrix& c) {
  Matrix d(x.rows, c.rows);
  const auto& K = simd::kernels();
  K.gemm_nt(x.rows, c.rows, x.cols, x.data.data(), c.data.data(), d.data.data());
  std::vector<double> xn(x.rows), cn(c.rows);
  for (std::size_t i = 0; i < x.rows; ++i) xn[i] = K.dot(x.cols, &x.data[i * x.cols], &x.data[i * x.cols]);
  for (std::size_t j = 0; j < c.rows; ++j) cn[j] = K.dot(c.cols, &c.data[j * c.cols], &c.data[j * c.cols]);
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t j = 0; j < c.rows; ++j) d(i, j) = std::max(0.0, xn[i] - 2.0 * d(i, j) + cn[j]);
  }
  return d;
}

double exact_sq(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

std::size_t ratio_count(double ratio, std::size_t n) {
  check_ratio(ratio);
  const double x = ratio * static_cast<double>(n);
  const double r = std::round(x);
  const auto c = std::abs(x - r) < 1e-9 ? static_cast<std::size_t>(r) : static_cast<std::size_t>(std::ceil(x));
  return std::min(c, n);
}

Selection baseline_random(std::span<const data::DataBlock> blocks, double ratio, std::uint64_t seed) {
  Selection out;
  for (std::size_t t = 0; t < blocks.size(); ++t) {
    Rng rng(derive_seed(seed, {0x7a4d, t}));
    auto idx = sample_without_replacement(blocks[t].size(), ratio_count(ratio, blocks[t].size()), rng);
    std::sort(idx.begin(), idx.end());
    out.push_back(std::move(idx));
  }
  return out;
}

std::pair<std::size_t, std::size_t> el2n_band(std::size_t n, double ratio) {
  const std::size_t c = ratio_count(ratio, n);
  const double centre = 0.9 * static_cast<double>(n) - 0.5 * static_cast<double>(c);
  const auto start = static_cast<std::size_t>(std::clamp(std::round(centre), 0.0, static_cast<double>(n - c)));
  return {start, start + c};
}

Selection baseline_el2n(std::span<const data::DataBlock> blocks, std::span<const model::ModelCheckpoint> checkpoints,
                        double ratio) {
  require(checkpoints.size() == blocks.size(), ErrorKind::kContract, "baseline_el2n: one checkpoint per block");
  Selection out;
  for (std::size_t t = 0; t < blocks.size(); ++t) {
    const auto scores = boundary::el2n_scores(checkpoints[t], blocks[t].records);
    std::vector<std::size_t> all(blocks[t].size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto ranked = boundary::rank_group(all, scores);
    const auto [lo, hi] = el2n_band(ranked.size(), ratio);
    std::vector<std::size_t> pick(ranked.begin() + static_cast<std::ptrdiff_t>(lo),
                                  ranked.begin() + static_cast<std::ptrdiff_t>(hi));
    std::sort(pick.begin(), pick.end());
    out.push_back(std::move(pick));
  }
  return out;
}

KMeansResult kmeans(const Matrix& points, std::size_t k, std::size_t iterations, std::uint64_t seed) {
  const std::size_t n = points.rows;
  const std::size_t D = points.cols;
  require(k >= 1 && k <= n, ErrorKind::kContract, "kmeans: need 1 <= k <= n");
  Rng rng(seed);
  KMeansResult r;
  r.centroids = Matrix(k, D);

  // k-means++ seeding.
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::vector<bool> chosen(n, false);
  std::size_t pick = static_cast<std::size_t>(rng.below(n));
  for (std::size_t c = 0; c < k; ++c) {
    chosen[pick] = true;
    std::copy_n(points.row_span(pick).begin(), D, r.centroids.row_span(c).begin());
    if (c + 1 == k) break;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], exact_sq(points.row_span(i), r.centroids.row_span(c)));
      total += d2[i];
    }
    if (total > 0.0) {
      double u = rng.uniform() * total;
      pick = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        pick = i;
        u -= d2[i];
        if (u < 0.0) break;
      }
    } else {
      // Every point coincides with a centre: take the next unchosen one.
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < n; ++i) {
        if (!chosen[i]) free.push_back(i);
      }
      pick = free[static_cast<std::size_t>(rng.below(free.size()))];
    }
  }

  r.assign.assign(n, 0);
  for (std::size_t it = 0; it < iterations; ++it) {
    const Matrix dist = squared_distances(points, r.centroids);
    bool changed = it == 0;
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < k; ++c) {
        if (dist(i, c) < dist(i, best)) best = c;
      }
      if (best != r.assign[i]) changed = true;
      r.assign[i] = best;
      obj += exact_sq(points.row_span(i), r.centroids.row_span(best));
    }
    r.objective.push_back(obj);
    r.iterations = it + 1;
    if (!changed) break;
    Matrix sums(k, D);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto s = sums.row_span(r.assign[i]);
      const auto p = points.row_span(i);
      for (std::size_t j = 0; j < D; ++j) s[j] += p[j];
      ++counts[r.assign[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centre
      auto dst = r.centroids.row_span(c);
      const auto s = sums.row_span(c);
      for (std::size_t j = 0; j < D; ++j) dst[j] = s[j] / static_cast<double>(counts[c]);
    }
  }
  return r;
}

std::vector<std::size_t> nearest_to_centroids(const Matrix& points, const Matrix& centroids) {
  std::vector<bool> taken(points.rows, false);
  std::vector<std::size_t> out;
  std::vector<std::size_t> order(points.rows);
  std::vector<double> dist(points.rows);
  for (std::size_t c = 0; c < centroids.rows && out.size() < points.rows; ++c) {
    for (std::size_t i = 0; i < points.rows; ++i) dist[i] = exact_sq(points.row_span(i), centroids.row_span(c));
    std::size_t best = points.rows;
    for (std::size_t i = 0; i < points.rows; ++i) {
      if (taken[i]) continue;
      if (best == points.rows || dist[i] < dist[best]) best = i;
    }
    taken[best] = true;
    out.push_back(best);
  }
  return out;
}

Selection baseline_kmeans(std::span<const data::DataBlock> blocks, std::span<const model::ModelCheckpoint> checkpoints,
                          double ratio, std::size_t iterations, std::uint64_t seed) {
  require(checkpoints.size() == blocks.size(), ErrorKind::kContract, "baseline_kmeans: one checkpoint per block");
  Selection out;
  for (std::size_t t = 0; t < blocks.size(); ++t) {
    if (blocks[t].empty()) {
      out.emplace_back();
      continue;
    }
    const Matrix x = model::embed_batch(checkpoints[t], blocks[t].records);
    const auto km = kmeans(x, ratio_count(ratio, x.rows), iterations, derive_seed(seed, {0x4b, t}));
    auto pick = nearest_to_centroids(x, km.centroids);
    std::sort(pick.begin(), pick.end());
    out.push_back(std::move(pick));
  }
  return out;
}

std::vector<boundary::SyntheticMemory> selection_to_memory(std::span<const data::DataBlock> blocks,
                                                           std::span<const model::ModelCheckpoint> checkpoints,
                                                           const Selection& selection) {
  require(checkpoints.size() == blocks.size() && selection.size() == blocks.size(), ErrorKind::kContract,
          "selection_to_memory: one checkpoint and selection per block");
  std::vector<boundary::SyntheticMemory> out;
  for (std::size_t t = 0; t < blocks.size(); ++t) {
    out.push_back(boundary::to_synthetic(blocks[t].records, selection[t], checkpoints[t]));
  }
  return out;
}

}  // namespace sdist::harness
