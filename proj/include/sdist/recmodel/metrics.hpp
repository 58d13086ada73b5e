// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sdist/diffgrad/autograd.hpp"
#include "sdist/diffgrad/matrix.hpp"

namespace sdist::model {

struct PredictionBatch {
  Matrix logits;   // n x K
  Matrix targets;  // n x K, in [0, 1]
};

/// Mean over samples of the per-task BCE summed over K tasks.
double multitask_bce(const PredictionBatch& batch);
/// Differentiable form of multitask_bce.
ad::Var multitask_bce(const ad::Var& logits, const ad::Var& targets);

/// Single-task ROC AUC with midrank ties. Undefined-metric error when either
/// class is absent.
double auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct MultiTaskAuc {
  double mean = 0.0;
  std::vector<double> per_task;  // NaN for skipped tasks
  std::vector<bool> skipped;
};

/// Column-wise AUC averaged over non-degenerate tasks. `scores` and `labels`
/// are n x K; labels are 0/1.
MultiTaskAuc auc_multitask(const Matrix& scores, const Matrix& labels);

inline constexpr double kLoglossClamp = 1e-7;

/// Mean BCE over samples and tasks of clamped probabilities.
double logloss(const Matrix& probabilities, const Matrix& labels);

Matrix sigmoid(const Matrix& logits);

}  // namespace sdist::model
