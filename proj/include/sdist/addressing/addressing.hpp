// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sdist/diffgrad/engine.hpp"

namespace sdist::addressing {

enum class InfluenceMode { kGhost, kFull };

std::string mode_name(InfluenceMode mode);
InfluenceMode parse_mode(const std::string& name);

/// Loss points for a dense model: one input row and one probability-target
/// row per sample. Real records carry hard 0/1 targets, synthetic samples
/// carry sigmoid(soft logits).
struct PointSet {
  Matrix inputs;   // n x D
  Matrix targets;  // n x K

  std::size_t size() const { return inputs.rows; }
  PointSet subset(std::span<const std::size_t> idx) const;
  PointSet row(std::size_t i) const;
};

/// Model + parameters the scores are evaluated at.
struct Anchor {
  const diffgrad::DifferentiableModel* model = nullptr;
  const ParamVector* params = nullptr;
};

/// Per-sample BCE summed over tasks, as a differentiable scalar.
ad::Var sample_loss(const Anchor& w, std::span<const ad::Var> params, const PointSet& point);

double sample_loss_value(const Anchor& w, const ParamVector& params, const PointSet& point);

/// Gradient inner product of the per-sample losses of x and z (single rows).
double influence(const Anchor& w, const PointSet& x, const PointSet& z, InfluenceMode mode);

/// Loss change on z after one real parameter step on the summed loss over S.
double utility_exact(const Anchor& w, const PointSet& S, const PointSet& z, double eta);

/// -eta * sum_x influence(x, z, full).
double utility_first_order(const Anchor& w, const PointSet& S, const PointSet& z, double eta);

/// For each row z of `targets`: sum over rows x of `sources` of influence(x, z).
std::vector<double> influence_sums(const Anchor& w, const PointSet& sources, const PointSet& targets,
                                   InfluenceMode mode);

/// Deficiency of every record in the minibatch against the memory.
std::vector<double> deficiency(const Anchor& w, const PointSet& batch, const PointSet& memory, InfluenceMode mode);

/// Responsibility of every memory sample towards the hard-target set.
std::vector<double> responsibility(const Anchor& w, const PointSet& memory, const PointSet& hard, InfluenceMode mode);

/// The `k` indices with smallest values; ties by index ascending. Output is
/// sorted by (value, index).
std::vector<std::size_t> argmin_k(std::span<const double> values, std::size_t k);
/// The `k` indices with largest values; ties by index ascending.
std::vector<std::size_t> argmax_k(std::span<const double> values, std::size_t k);

std::size_t hard_target_count(std::size_t batch_size, double ratio);

struct AddressingSelection {
  std::vector<std::size_t> hard;    // indices into the minibatch
  std::vector<std::size_t> active;  // indices into the memory
  std::vector<double> deficiency;
  std::vector<double> responsibility;
  double flops = 0.0;  // (|batch| + |memory|) * |theta| by convention
};

std::vector<std::size_t> select_hard_targets(std::span<const double> deficiency, double ratio);
/// Clamps `active_size` to the memory size with a warning.
std::vector<std::size_t> select_active_memory(std::span<const double> responsibility, std::size_t active_size);

AddressingSelection address(const Anchor& w, const PointSet& batch, const PointSet& memory, double ratio,
                            std::size_t active_size, InfluenceMode mode);

}  // namespace sdist::addressing
