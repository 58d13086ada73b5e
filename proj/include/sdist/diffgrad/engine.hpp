// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "sdist/diffgrad/autograd.hpp"
#include "sdist/diffgrad/param_vector.hpp"

namespace sdist::diffgrad {

using ad::Var;

/// Scalar loss as a function of per-segment parameter Vars.
using ParamLoss = std::function<Var(std::span<const Var> params)>;
/// Loss of a single sample `i`.
using SampleLoss = std::function<Var(std::span<const Var> params, std::size_t i)>;

/// Output of a dense model whose last layer is affine: logits = head_input W + b.
struct ForwardResult {
  Var logits;
  Var head_input;
};

struct HeadSegments {
  std::size_t weight = 0;  // (hidden x K)
  std::size_t bias = 0;    // (1 x K)
};

/// A dense network mapping an (n x input_width) batch to (n x K) logits.
class DifferentiableModel {
 public:
  virtual ~DifferentiableModel() = default;
  virtual ForwardResult forward(std::span<const Var> params, const Var& inputs) const = 0;
  /// Segments of the final affine layer, if the architecture has one.
  virtual std::optional<HeadSegments> final_affine() const = 0;
};

/// Gradient with the same layout as `params`. Non-finite loss or gradient
/// entries raise a numerical-failure error naming the segment.
ParamVector gradient(const ParamLoss& loss, const ParamVector& params);

/// Element i is the gradient of `loss(params, i)`.
std::vector<ParamVector> per_sample_gradient(const SampleLoss& loss, const ParamVector& params, std::size_t n);

/// Last-layer factors of a per-sample gradient.
struct GhostFeatures {
  std::vector<double> residual;  // sigmoid(logits) - target, length K
  std::vector<double> hidden;    // input of the final affine layer
};

/// Per-sample BCE gradient of the final layer is residual (x) hidden for the
/// weight and residual for the bias. `input` and `target` are 1-row matrices.
GhostFeatures ghost_features(const DifferentiableModel& model, const ParamVector& params, const Matrix& input,
                             const Matrix& target);

/// Batched form: one GhostFeatures per row.
std::vector<GhostFeatures> ghost_features_batch(const DifferentiableModel& model, const ParamVector& params,
                                                const Matrix& inputs, const Matrix& targets);

/// <grad_x, grad_z> restricted to the final affine layer: (r_x . r_z)(h_x . h_z + 1).
double ghost_dot(const GhostFeatures& x, const GhostFeatures& z);

// ---------------------------------------------------------------------------
// Unrolled inner SGD with truncated differentiation.

/// One inner mini-batch of learnable data: inputs (n x width) and target
/// logits (n x K) that enter the loss through a sigmoid.
struct InnerBatch {
  Matrix inputs;
  Matrix target_logits;
  std::size_t id = 0;
};

/// Inner training loss L(params; inputs, target_logits).
using InnerLoss = std::function<Var(std::span<const Var> params, const Var& inputs, const Var& target_logits)>;

struct Window {
  std::size_t start = 0;
  std::size_t length = 0;
  std::size_t end() const { return start + length; }
};

/// Recorded trajectory. Steps before window.start ran without a graph; the
/// parameters entering step window.start are constants (stop-gradient).
/// Steps from window.start onward keep their graph, so the meta-gradient can
/// flow from theta_M back to the data consumed inside the window.
class UnrollTape {
 public:
  struct Step {
    std::size_t batch_id = 0;
    double lr = 0.0;
    bool in_window = false;
    bool recorded = false;  // graph kept for this step
    Var inputs;             // leaves; require grad only inside the window
    Var target_logits;
    std::size_t batch_rows = 0;
    std::size_t input_cols = 0;
    std::size_t logit_cols = 0;
  };

  const ParamVector& initial_params() const { return initial_; }
  const std::vector<Step>& steps() const { return steps_; }
  Window window() const { return window_; }
  std::size_t step_count() const { return steps_.size(); }
  std::span<const Var> final_param_vars() const { return final_vars_; }
  const ParamVector& final_params() const { return final_; }
  bool valid() const { return valid_; }
  /// Steps whose graph is retained (window start through M).
  std::size_t recorded_steps() const;

 private:
  friend std::pair<ParamVector, UnrollTape> unroll_sgd(const ParamVector&, std::span<const InnerBatch>, double,
                                                       std::size_t, Window, const InnerLoss&);
  ParamVector initial_;
  ParamVector final_;
  std::vector<Step> steps_;
  std::vector<Var> final_vars_;
  Window window_;
  bool valid_ = false;
};

/// theta_m = theta_{m-1} - lr * grad L(theta_{m-1}; batch_m), m = 1..steps.
/// Requires batches.size() == steps, lr >= 0, window.end() <= steps and
/// window.length >= 1 (a zero-step unroll takes window {0, 0}).
std::pair<ParamVector, UnrollTape> unroll_sgd(const ParamVector& theta0, std::span<const InnerBatch> batches,
                                               double lr, std::size_t steps, Window window, const InnerLoss& loss);

struct StepDataGradient {
  std::size_t batch_id = 0;
  Matrix d_inputs;
  Matrix d_target_logits;
};

/// d meta_loss(theta_M) / d(data of every step); exactly zero outside the window.
std::vector<StepDataGradient> truncated_meta_gradient(const UnrollTape& tape, const ParamLoss& meta_loss);

}  // namespace sdist::diffgrad
