// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sdist/bilevel/distill.hpp"
#include "sdist/boundary/memory.hpp"
#include "sdist/datastream/partition.hpp"
#include "sdist/harness/config.hpp"
#include "sdist/harness/report.hpp"
#include "sdist/recmodel/model.hpp"

namespace sdist::harness {

struct LoadedStream {
  data::PartitionedStream parts;
  std::vector<std::size_t> vocab;
  std::size_t tasks = 0;
};

LoadedStream load_stream(const ExperimentConfig& config);

/// Order-sensitive fingerprint of a split's records.
std::uint64_t split_hash(const data::DataBlock& block);

std::vector<model::ModelCheckpoint> train_reference_models(const ExperimentConfig& config, const LoadedStream& stream);

bilevel::StreamingConfig streaming_config(const ExperimentConfig& config, const LoadedStream& stream);

/// Selection baseline ("random", "el2n", "kmeans") as embedding/soft-label
/// sets, one per historical block. `refs` holds phi_0..phi_T.
std::vector<boundary::SyntheticMemory> baseline_sets(const std::string& name, const ExperimentConfig& config,
                                                     const LoadedStream& stream,
                                                     std::span<const model::ModelCheckpoint> refs);

/// Trains the candidate for one (method, arch) cell. `distilled` is required
/// for diet and the selection methods.
model::ModelCheckpoint train_method(const std::string& method, model::Arch arch, const ExperimentConfig& config,
                                    const LoadedStream& stream, std::span<const model::ModelCheckpoint> refs,
                                    std::span<const boundary::SyntheticMemory> distilled);

struct ExperimentResult {
  std::vector<MetricsRow> rows;
  std::uint64_t train_hash = 0;
  std::uint64_t validation_hash = 0;
  std::uint64_t test_hash = 0;
  std::vector<bilevel::StageResult> stages;
  std::vector<std::size_t> quotas;
  std::map<std::string, std::size_t> selected_counts;  // method -> total samples
};

using Progress = std::function<void(const std::string&)>;

/// Runs every configured method for every candidate arch. Writes artifacts
/// into `out_dir` when it is non-empty.
ExperimentResult run_experiment(const ExperimentConfig& config, const std::string& out_dir = "",
                                const Progress& progress = {});

}  // namespace sdist::harness
