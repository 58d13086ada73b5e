// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sdist/addressing/addressing.hpp"
#include "sdist/boundary/init.hpp"
#include "sdist/boundary/memory.hpp"
#include "sdist/common/rng.hpp"
#include "sdist/datastream/records.hpp"
#include "sdist/diffgrad/engine.hpp"
#include "sdist/recmodel/model.hpp"
#include "sdist/recmodel/train.hpp"

namespace sdist::bilevel {

enum class AddressingMode { kGhost, kFull, kNone };

std::string addressing_mode_name(AddressingMode mode);
AddressingMode parse_addressing_mode(const std::string& name);

/// Which checkpoint scores addressing and embeds hard targets.
enum class AnchorChoice { kCurrent, kPrevious };

struct DistillConfig {
  std::size_t outer_iterations = 300;  // K_out
  std::size_t inner_steps = 20;        // M
  std::size_t window = 5;              // W
  double inner_lr = 0.05;              // alpha
  double outer_lr = 0.01;              // beta, embeddings
  double label_lr_multiplier = 0.1;
  double hard_ratio = 0.1;
  std::size_t batch_size = 512;   // real minibatch per outer iteration
  std::size_t active_size = 0;    // 0 means window * inner_steps
  AddressingMode addressing = AddressingMode::kGhost;
  AnchorChoice anchor = AnchorChoice::kCurrent;
  std::uint64_t seed = 0;
};

void validate(const DistillConfig& config);

/// Proxy dense parameters for outer iteration `iteration` of stage t: a seeded
/// random init for t = 1, otherwise a copy of the stage t-1 checkpoint's
/// dense parameters. `checkpoints` is searched by stage tag.
ParamVector stage_aware_init(const model::DenseNet& net, std::span<const model::ModelCheckpoint> checkpoints,
                             std::uint32_t t, std::uint64_t seed);

/// Splits the active set into `steps` batches of ceil(|active|/steps) rows,
/// shuffled, padding the tail by wrapping around.
std::vector<std::vector<std::size_t>> make_inner_batches(std::span<const std::size_t> active, std::size_t steps,
                                                         Rng& rng);

/// BCE(f(e), sigmoid(soft logits)) summed over tasks, mean over the batch.
diffgrad::InnerLoss synthetic_loss(const model::DenseNet& net);

std::pair<ParamVector, diffgrad::UnrollTape> inner_loop(const model::DenseNet& net, const ParamVector& theta0,
                                                        const boundary::SyntheticMemory& memory,
                                                        const std::vector<std::vector<std::size_t>>& batches,
                                                        double lr, diffgrad::Window window);

/// Multi-task BCE of the hard real records (hard labels, frozen embeddings).
ad::Var meta_loss(const model::DenseNet& net, std::span<const ad::Var> params, const addressing::PointSet& hard);
double meta_loss_value(const model::DenseNet& net, const ParamVector& params, const addressing::PointSet& hard);

struct Counters {
  double addressing_flops = 0.0;
  double inner_flops = 0.0;
  double meta_flops = 0.0;
  std::size_t memory_bytes = 0;
  std::size_t tape_bytes = 0;  // peak retained parameter snapshots
};

struct TraceEntry {
  std::size_t iteration = 0;
  double meta_loss = 0.0;  // at theta_M, before the memory update
  std::size_t window_start = 0;
  std::size_t hard = 0;
  std::size_t active = 0;
  std::size_t updated = 0;  // synthetic samples touched
  double deficiency_min = 0.0, deficiency_mean = 0.0, deficiency_max = 0.0;
  double responsibility_min = 0.0, responsibility_mean = 0.0, responsibility_max = 0.0;
};

struct StageContext {
  const model::ModelCheckpoint* anchor = nullptr;  // addressing + hard-target embeddings
  std::span<const model::ModelCheckpoint> checkpoints;  // for stage-aware init
  const data::DataBlock* block = nullptr;
  std::uint32_t stage = 1;
};

/// One outer iteration; mutates `memory` in place.
TraceEntry outer_step(boundary::SyntheticMemory& memory, const StageContext& ctx, const DistillConfig& config,
                      std::size_t iteration, Counters& counters);

struct StageResult {
  boundary::SyntheticMemory memory;
  std::vector<TraceEntry> trace;
  Counters counters;
  bool aborted = false;
  std::string error;
};

StageResult distill_stage(const boundary::SyntheticMemory& memory_init, const StageContext& ctx,
                          const DistillConfig& config);

std::string trace_json(const StageResult& result, const DistillConfig& config, std::uint32_t stage);

struct StreamingConfig {
  model::ModelSpec spec;
  model::TrainConfig reference;
  DistillConfig distill;
  boundary::SelectionWindow selection;
  std::size_t probe_size = 256;
  double min_group_factor = 2.0;
  double compression_ratio = 0.02;
  std::uint64_t seed = 0;
};

/// n_t per stage so that |D_1'| + sum_{t>1} 2 n_t matches ratio * total.
std::vector<std::size_t> stage_quotas(std::span<const data::DataBlock> blocks, double ratio);

struct StreamingResult {
  std::vector<model::ModelCheckpoint> checkpoints;     // phi_0 .. phi_T
  std::vector<boundary::SyntheticMemory> distilled;    // D_syn_1 .. D_syn_T
  std::vector<StageResult> stages;
  std::vector<std::size_t> quotas;
};

/// Called after each stage with (t, checkpoint phi_t, stage result).
using StageCallback = std::function<void(std::uint32_t, const model::ModelCheckpoint&, const StageResult&)>;

/// When `references` holds phi_0..phi_T they are used as-is instead of
/// being retrained.
StreamingResult run_streaming_distillation(std::span<const data::DataBlock> blocks, const StreamingConfig& config,
                                           const StageCallback& on_stage = {},
                                           std::span<const model::ModelCheckpoint> references = {});

/// phi_0 .. phi_T by continual updates over the blocks.
std::vector<model::ModelCheckpoint> train_reference(std::span<const data::DataBlock> blocks,
                                                    const model::ModelSpec& spec, const model::TrainConfig& train,
                                                    std::uint64_t seed);

}  // namespace sdist::bilevel
