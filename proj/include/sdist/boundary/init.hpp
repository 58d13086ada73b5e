// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "sdist/boundary/memory.hpp"
#include "sdist/datastream/records.hpp"
#include "sdist/recmodel/model.hpp"

namespace sdist::boundary {

struct SelectionWindow {
  double low = 60.0;
  double high = 90.0;
};

void validate_window(const SelectionWindow& w);

double el2n(const model::ModelCheckpoint& ckpt, const data::InteractionRecord& record);
std::vector<double> el2n_scores(const model::ModelCheckpoint& ckpt, std::span<const data::InteractionRecord> records);

/// Within-group percentile of ascending rank i (0-based) among n.
double rank_percentile(std::size_t rank, std::size_t n);

/// Members of `group` sorted by (score, index) ascending.
std::vector<std::size_t> rank_group(std::span<const std::size_t> group, std::span<const double> scores);

/// Group members whose within-group percentile lies in the window, in rank order.
std::vector<std::size_t> eligible_in_window(std::span<const std::size_t> group, std::span<const double> scores,
                                            const SelectionWindow& window);

/// min(quota, |eligible|) members drawn uniformly from the eligible set,
/// returned in ascending index order. `scores` is indexed by record index.
std::vector<std::size_t> select_upper_middle(std::span<const std::size_t> group, std::span<const double> scores,
                                             std::size_t quota, const SelectionWindow& window, std::uint64_t seed);

/// Per-group counts under the equal-base-plus-redistribution rule.
/// `group_sizes` and `eligible` are keyed by label combination.
std::map<std::uint32_t, std::size_t> allocate_quota(const std::map<std::uint32_t, std::size_t>& group_sizes,
                                                    const std::map<std::uint32_t, std::size_t>& eligible,
                                                    std::size_t total, double min_group_factor = 2.0);

struct CandidateSet {
  std::vector<std::size_t> indices;  // into the block, ascending
  std::vector<double> scores;        // EL2N of every block record
  std::map<std::uint32_t, std::size_t> per_group;
};

CandidateSet build_candidate_set(const data::DataBlock& block, const model::ModelCheckpoint& ckpt, std::size_t quota,
                                 const SelectionWindow& window, std::uint64_t seed, double min_group_factor = 2.0);

SyntheticSample to_synthetic(const data::InteractionRecord& record, const model::ModelCheckpoint& ckpt);
SyntheticMemory to_synthetic(std::span<const data::InteractionRecord> records, std::span<const std::size_t> indices,
                             const model::ModelCheckpoint& ckpt);

/// Hard-label loss points for records under the checkpoint's tables.
addressing::PointSet record_points(const model::ModelCheckpoint& ckpt, std::span<const data::InteractionRecord> records,
                                   std::span<const std::size_t> indices);

/// Ghost-influence alignment of every history sample against a seeded probe
/// subset of the candidate records.
std::vector<double> historical_alignment(const SyntheticMemory& history, const data::DataBlock& block,
                                         std::span<const std::size_t> candidates, const model::ModelCheckpoint& ckpt,
                                         std::size_t probe_size, std::uint64_t seed);

/// Current samples followed by the top-n_t history samples by alpha.
SyntheticMemory fuse_memory(const SyntheticMemory& current, const SyntheticMemory& history,
                            std::span<const double> alpha, std::size_t quota);

struct InitConfig {
  std::size_t quota = 0;  // n_t
  SelectionWindow window;
  std::size_t probe_size = 256;
  double min_group_factor = 2.0;
  std::uint64_t seed = 0;
};

struct InitResult {
  SyntheticMemory memory;
  CandidateSet candidates;
  std::size_t retained = 0;
};

InitResult init_stage(const data::DataBlock& block, const model::ModelCheckpoint& ckpt, const SyntheticMemory& history,
                      const InitConfig& config);

}  // namespace sdist::boundary
