// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#include "sdist/addressing/addressing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sdist/common/error.hpp"
#include "sdist/common/log.hpp"

namespace sdist::addressing {
namespace {

using diffgrad::GhostFeatures;

void check_anchor(const Anchor& w) {
  require(w.model != nullptr && w.params != nullptr, ErrorKind::kContract, "addressing: anchor not set");
}

void check_points(const PointSet& p) {
  require(p.inputs.rows == p.targets.rows, ErrorKind::kContract, "addressing: input/target row mismatch");
}

ParamVector point_gradient(const Anchor& w, const PointSet& point) {
  return diffgrad::gradient([&](std::span<const ad::Var> p) { return sample_loss(w, p, point); }, *w.params);
}

// Sum of per-sample gradients of `points` (one backward pass over the summed
// loss; equals the sum of per-sample gradients by linearity).
ParamVector summed_gradient(const Anchor& w, const PointSet& points) {
  if (points.size() == 0) return w.params->zeros_like();
  return diffgrad::gradient(
      [&](std::span<const ad::Var> p) {
        const auto fr = w.model->forward(p, ad::Var(points.inputs));
        return ad::scale(ad::bce_with_logits(fr.logits, ad::Var(points.targets)), static_cast<double>(points.size()));
      },
      *w.params);
}

std::vector<double> ghost_sums(const Anchor& w, const PointSet& sources, const PointSet& targets) {
  std::vector<double> out(targets.size(), 0.0);
  if (sources.size() == 0 || targets.size() == 0) return out;
  const auto xs = diffgrad::ghost_features_batch(*w.model, *w.params, sources.inputs, sources.targets);
  const auto zs = diffgrad::ghost_features_batch(*w.model, *w.params, targets.inputs, targets.targets);
  const std::size_t K = xs[0].residual.size();
  const std::size_t H = xs[0].hidden.size();
  // sum_x (r_x . r_z)(h_x . h_z + 1) = r_z^T G h_z + r_z . s, with
  // G = sum_x r_x h_x^T and s = sum_x r_x.
  std::vector<double> G(K * H, 0.0);
  std::vector<double> s(K, 0.0);
  for (const auto& x : xs) {
    for (std::size_t k = 0; k < K; ++k) {
      s[k] += x.residual[k];
      const double rk = x.residual[k];
      for (std::size_t j = 0; j < H; ++j) G[k * H + j] += rk * x.hidden[j];
    }
  }
  for (std::size_t i = 0; i < zs.size(); ++i) {
    const auto& z = zs[i];
    double v = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      double gh = 0.0;
      for (std::size_t j = 0; j < H; ++j) gh += G[k * H + j] * z.hidden[j];
      v += z.residual[k] * (gh + s[k]);
    }
    out[i] = v;
  }
  return out;
}

}  // namespace

std::string mode_name(InfluenceMode mode) { return mode == InfluenceMode::kFull ? "full" : "ghost"; }

InfluenceMode parse_mode(const std::string& name) {
  if (name == "ghost") return InfluenceMode::kGhost;
  if (name == "full") return InfluenceMode::kFull;
  fail(ErrorKind::kConfig, "unknown influence mode: " + name);
}

PointSet PointSet::subset(std::span<const std::size_t> idx) const {
  return {gather_rows(inputs, idx), gather_rows(targets, idx)};
}

PointSet PointSet::row(std::size_t i) const {
  const std::size_t idx[1] = {i};
  return subset(idx);
}

ad::Var sample_loss(const Anchor& w, std::span<const ad::Var> params, const PointSet& point) {
  const auto fr = w.model->forward(params, ad::Var(point.inputs));
  return ad::bce_with_logits(fr.logits, ad::Var(point.targets));
}

double sample_loss_value(const Anchor& w, const ParamVector& params, const PointSet& point) {
  ad::NoGradGuard guard;
  const auto vars = params.to_vars(false);
  return sample_loss(w, vars, point).item();
}

double influence(const Anchor& w, const PointSet& x, const PointSet& z, InfluenceMode mode) {
  check_anchor(w);
  check_points(x);
  check_points(z);
  require(x.size() == 1 && z.size() == 1, ErrorKind::kContract, "influence: expects single samples");
  if (mode == InfluenceMode::kGhost) {
    const auto gx = diffgrad::ghost_features(*w.model, *w.params, x.inputs, x.targets);
    const auto gz = diffgrad::ghost_features(*w.model, *w.params, z.inputs, z.targets);
    return diffgrad::ghost_dot(gx, gz);
  }
  return dot(point_gradient(w, x), point_gradient(w, z));
}

double utility_exact(const Anchor& w, const PointSet& S, const PointSet& z, double eta) {
  check_anchor(w);
  require(eta >= 0.0, ErrorKind::kContract, "utility: eta must be >= 0");
  const double before = sample_loss_value(w, *w.params, z);
  ParamVector stepped = *w.params;
  if (S.size() > 0) {
    const ParamVector g = summed_gradient(w, S);
    auto v = stepped.values();
    const auto gv = g.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= eta * gv[i];
  }
  return sample_loss_value(w, stepped, z) - before;
}

double utility_first_order(const Anchor& w, const PointSet& S, const PointSet& z, double eta) {
  check_anchor(w);
  require(eta >= 0.0, ErrorKind::kContract, "utility: eta must be >= 0");
  double s = 0.0;
  for (std::size_t i = 0; i < S.size(); ++i) s += influence(w, S.row(i), z, InfluenceMode::kFull);
  return -eta * s;
}

std::vector<double> influence_sums(const Anchor& w, const PointSet& sources, const PointSet& targets,
                                   InfluenceMode mode) {
  check_anchor(w);
  check_points(sources);
  check_points(targets);
  if (mode == InfluenceMode::kGhost) return ghost_sums(w, sources, targets);
  std::vector<double> out(targets.size(), 0.0);
  if (sources.size() == 0) return out;
  const ParamVector total = summed_gradient(w, sources);
  for (std::size_t i = 0; i < targets.size(); ++i) out[i] = dot(total, point_gradient(w, targets.row(i)));
  return out;
}

std::vector<double> deficiency(const Anchor& w, const PointSet& batch, const PointSet& memory, InfluenceMode mode) {
  return influence_sums(w, memory, batch, mode);
}

std::vector<double> responsibility(const Anchor& w, const PointSet& memory, const PointSet& hard,
                                   InfluenceMode mode) {
  require(hard.size() > 0, ErrorKind::kContract, "responsibility: empty hard-target set");
  return influence_sums(w, hard, memory, mode);
}

std::vector<std::size_t> argmin_k(std::span<const double> values, std::size_t k) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) { return values[a] < values[b] || (values[a] == values[b] && a < b); });
  idx.resize(k);
  return idx;
}

std::vector<std::size_t> argmax_k(std::span<const double> values, std::size_t k) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) { return values[a] > values[b] || (values[a] == values[b] && a < b); });
  idx.resize(k);
  return idx;
}

std::size_t hard_target_count(std::size_t batch_size, double ratio) {
  require(ratio > 0.0 && ratio <= 1.0, ErrorKind::kContract, "hard ratio must be in (0, 1]");
  // Guard against ratio*n landing a hair above an integer (0.1 * 100).
  const double x = ratio * static_cast<double>(batch_size);
  const double r = std::round(x);
  const auto c = std::abs(x - r) < 1e-9 ? static_cast<std::size_t>(r) : static_cast<std::size_t>(std::ceil(x));
  return std::min(c, batch_size);
}

std::vector<std::size_t> select_hard_targets(std::span<const double> deficiency, double ratio) {
  return argmin_k(deficiency, hard_target_count(deficiency.size(), ratio));
}

std::vector<std::size_t> select_active_memory(std::span<const double> responsibility, std::size_t active_size) {
  require(active_size >= 1, ErrorKind::kContract, "active memory size must be >= 1");
  if (active_size > responsibility.size()) {
    log::warn("active memory size " + std::to_string(active_size) + " clamped to memory size " +
              std::to_string(responsibility.size()));
    active_size = responsibility.size();
  }
  return argmax_k(responsibility, active_size);
}

AddressingSelection address(const Anchor& w, const PointSet& batch, const PointSet& memory, double ratio,
                            std::size_t active_size, InfluenceMode mode) {
  AddressingSelection sel;
  sel.deficiency = deficiency(w, batch, memory, mode);
  sel.hard = select_hard_targets(sel.deficiency, ratio);
  sel.responsibility = responsibility(w, memory, batch.subset(sel.hard), mode);
  sel.active = select_active_memory(sel.responsibility, active_size);
  sel.flops = static_cast<double>(batch.size() + memory.size()) * static_cast<double>(w.params->size());
  return sel;
}

}  // namespace sdist::addressing
