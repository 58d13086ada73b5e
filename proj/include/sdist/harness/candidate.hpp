// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sdist/boundary/memory.hpp"
#include "sdist/datastream/records.hpp"
#include "sdist/harness/config.hpp"
#include "sdist/recmodel/model.hpp"

namespace sdist::harness {

struct Evaluation {
  double auc = 0.0;
  double logloss = 0.0;
};

Evaluation evaluate(const model::ModelCheckpoint& ckpt, const data::DataBlock& split);

model::ModelSpec reference_spec(const ExperimentConfig& config, std::span<const std::size_t> vocab, std::size_t tasks);
model::ModelSpec candidate_spec(const ExperimentConfig& config, model::Arch arch, std::span<const std::size_t> vocab,
                                std::size_t tasks);

struct CandidateRun {
  model::ModelCheckpoint ckpt;
  std::vector<double> validation_auc;  // per distilled-data epoch
  std::size_t best_epoch = 0;          // 1-based; 0 if no distilled phase
};

/// Dense params trained on the concatenated distilled sets (tables inherited
/// from phi_T and frozen) for up to the epoch budget, keeping the best
/// validation-AUC epoch, then one fine-tuning epoch on the subsequent block
/// with embeddings unfrozen.
CandidateRun warmup_train_candidate(const model::ModelSpec& spec, std::span<const boundary::SyntheticMemory> distilled,
                                    const model::ModelCheckpoint& phi_T, const data::DataBlock& subsequent,
                                    const data::DataBlock& validation, const CandidateConfig& config,
                                    std::uint64_t seed);

/// Fresh model, one epoch over every historical block in order, then the subsequent block.
model::ModelCheckpoint train_full_data(const model::ModelSpec& spec, std::span<const data::DataBlock> historical,
                                       const data::DataBlock& subsequent, const CandidateConfig& config,
                                       std::uint64_t seed);

/// Fresh model, one epoch on the subsequent block.
model::ModelCheckpoint train_cold_start(const model::ModelSpec& spec, const data::DataBlock& subsequent,
                                        const CandidateConfig& config, std::uint64_t seed);

/// phi_T tables with fresh dense params, one epoch on the subsequent block.
model::ModelCheckpoint train_warmup_start(const model::ModelSpec& spec, const model::ModelCheckpoint& phi_T,
                                          const data::DataBlock& subsequent, const CandidateConfig& config,
                                          std::uint64_t seed);

}  // namespace sdist::harness
