// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sdist/datastream/records.hpp"
#include "sdist/recmodel/model.hpp"

namespace sdist::model {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::size_t size, AdamConfig config);
  void step(std::span<double> params, std::span<const double> grad);
  std::size_t steps() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

struct TrainConfig {
  AdamConfig adam;
  std::size_t batch_size = 512;
  std::size_t epochs = 1;
  bool train_embeddings = true;
  bool train_dense = true;
  std::uint64_t seed = 0;
};

struct TrainStats {
  std::size_t records_seen = 0;
  std::size_t steps = 0;
  double mean_loss = 0.0;  // over the last epoch
};

/// Minibatch Adam on hard-labelled records; mutates `ckpt` in place. Fresh
/// optimizer state per call.
TrainStats train_on_records(ModelCheckpoint& ckpt, std::span<const data::InteractionRecord> records,
                            const TrainConfig& config);

/// Minibatch Adam of dense params on fixed inputs against probability targets.
/// Pass `state` to carry optimizer moments across calls.
TrainStats train_dense(const DenseNet& net, ParamVector& dense, const Matrix& inputs, const Matrix& targets,
                       const TrainConfig& config, Adam* state = nullptr);

/// One pass over the block starting from `prev`; returns a new checkpoint
/// with stage prev.stage + 1. `prev` is untouched.
ModelCheckpoint continual_update(const ModelCheckpoint& prev, const data::DataBlock& block,
                                 const TrainConfig& config, TrainStats* stats = nullptr);

}  // namespace sdist::model
