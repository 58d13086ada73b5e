// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#include "sdist/diffgrad/engine.hpp"

#include <cmath>
#include <string>

#include "sdist/common/error.hpp"

namespace sdist::diffgrad {
namespace {

void check_finite_grads(const ParamVector& params, std::span<const Var> grads) {
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!grads[i].value().all_finite()) {
      fail(ErrorKind::kNumerical, "non-finite gradient in segment '" + params.layout()[i].name + "'");
    }
  }
}

}  // namespace

ParamVector gradient(const ParamLoss& loss, const ParamVector& params) {
  const std::vector<Var> vars = params.to_vars(true);
  const Var out = loss(vars);
  if (!std::isfinite(out.item())) fail(ErrorKind::kNumerical, "non-finite loss value");
  const std::vector<Var> g = ad::grad(out, vars, false);
  check_finite_grads(params, g);
  return params.with_values(g);
}

std::vector<ParamVector> per_sample_gradient(const SampleLoss& loss, const ParamVector& params, std::size_t n) {
  require(n > 0, ErrorKind::kContract, "per_sample_gradient: empty batch");
  std::vector<ParamVector> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(gradient([&](std::span<const Var> p) { return loss(p, i); }, params));
  }
  return out;
}

std::vector<GhostFeatures> ghost_features_batch(const DifferentiableModel& model, const ParamVector& params,
                                                const Matrix& inputs, const Matrix& targets) {
  if (!model.final_affine()) {
    fail(ErrorKind::kUnsupportedArchitecture, "ghost features need a final affine layer");
  }
  ad::NoGradGuard no_grad;
  const std::vector<Var> vars = params.to_vars(false);
  const ForwardResult fr = model.forward(vars, Var(inputs));
  if (!fr.head_input.defined()) {
    fail(ErrorKind::kUnsupportedArchitecture, "model does not expose its final-layer input");
  }
  const Matrix& logits = fr.logits.value();
  const Matrix& hidden = fr.head_input.value();
  require(logits.same_shape(targets), ErrorKind::kContract, "ghost_features: target shape mismatch");
  std::vector<GhostFeatures> out(inputs.rows);
  for (std::size_t i = 0; i < inputs.rows; ++i) {
    auto& g = out[i];
    g.residual.resize(logits.cols);
    for (std::size_t k = 0; k < logits.cols; ++k) g.residual[k] = ad::stable_sigmoid(logits(i, k)) - targets(i, k);
    auto h = hidden.row_span(i);
    g.hidden.assign(h.begin(), h.end());
  }
  return out;
}

GhostFeatures ghost_features(const DifferentiableModel& model, const ParamVector& params, const Matrix& input,
                             const Matrix& target) {
  require(input.rows == 1 && target.rows == 1, ErrorKind::kContract, "ghost_features: expects single-row input");
  return ghost_features_batch(model, params, input, target).front();
}

double ghost_dot(const GhostFeatures& x, const GhostFeatures& z) {
  require(x.residual.size() == z.residual.size() && x.hidden.size() == z.hidden.size(), ErrorKind::kContract,
          "ghost_dot: feature size mismatch");
  double rr = 0.0;
  for (std::size_t k = 0; k < x.residual.size(); ++k) rr += x.residual[k] * z.residual[k];
  double hh = 0.0;
  for (std::size_t j = 0; j < x.hidden.size(); ++j) hh += x.hidden[j] * z.hidden[j];
  return rr * (hh + 1.0);
}

std::size_t UnrollTape::recorded_steps() const {
  std::size_t n = 0;
  for (const auto& s : steps_) n += s.recorded ? 1 : 0;
  return n;
}

std::pair<ParamVector, UnrollTape> unroll_sgd(const ParamVector& theta0, std::span<const InnerBatch> batches,
                                               double lr, std::size_t steps, Window window, const InnerLoss& loss) {
  require(batches.size() == steps, ErrorKind::kContract, "unroll_sgd: need one batch per step");
  require(lr >= 0.0, ErrorKind::kContract, "unroll_sgd: negative learning rate");
  if (steps == 0) {
    require(window.start == 0 && window.length == 0, ErrorKind::kContract, "unroll_sgd: window on empty unroll");
  } else {
    require(window.length >= 1 && window.end() <= steps, ErrorKind::kContract,
            "unroll_sgd: window must satisfy 1 <= length and start + length <= steps");
  }

  UnrollTape tape;
  tape.initial_ = theta0;
  tape.window_ = window;
  tape.steps_.resize(steps);

  const std::size_t nseg = theta0.segment_count();
  std::vector<Matrix> plain(nseg);
  for (std::size_t i = 0; i < nseg; ++i) plain[i] = theta0.segment_matrix(i);
  std::vector<Var> vars;

  auto diverged = [](std::size_t m) {
    fail(ErrorKind::kDivergence, "inner trajectory became non-finite at step " + std::to_string(m + 1));
  };

  for (std::size_t m = 0; m < steps; ++m) {
    const InnerBatch& b = batches[m];
    auto& rec = tape.steps_[m];
    rec.batch_id = b.id;
    rec.lr = lr;
    rec.batch_rows = b.inputs.rows;
    rec.input_cols = b.inputs.cols;
    rec.logit_cols = b.target_logits.cols;
    if (m < window.start) {
      std::vector<Var> pv;
      pv.reserve(nseg);
      for (const auto& p : plain) pv.emplace_back(p, true);
      const Var l = loss(pv, Var(b.inputs), Var(b.target_logits));
      if (!std::isfinite(l.item())) diverged(m);
      const auto g = ad::grad(l, pv, false);
      for (std::size_t i = 0; i < nseg; ++i) {
        auto& p = plain[i].data;
        const auto& gi = g[i].value().data;
        for (std::size_t j = 0; j < p.size(); ++j) p[j] -= lr * gi[j];
        if (!plain[i].all_finite()) diverged(m);
      }
      continue;
    }
    if (m == window.start) {
      // Stop-gradient: the parameters entering the window are fresh leaves.
      vars.clear();
      for (const auto& p : plain) vars.emplace_back(p, true);
    }
    rec.recorded = true;
    rec.in_window = m < window.end();
    rec.inputs = Var(b.inputs, rec.in_window);
    rec.target_logits = Var(b.target_logits, rec.in_window);
    const Var l = loss(vars, rec.inputs, rec.target_logits);
    if (!std::isfinite(l.item())) diverged(m);
    const auto g = ad::grad(l, vars, true);
    for (std::size_t i = 0; i < nseg; ++i) {
      vars[i] = ad::sub(vars[i], ad::scale(g[i], lr));
      if (!vars[i].value().all_finite()) diverged(m);
    }
  }
  if (vars.empty()) {
    for (const auto& p : plain) vars.emplace_back(p, true);
  }
  tape.final_vars_ = vars;
  tape.final_ = theta0.with_values(vars);
  tape.valid_ = true;
  ParamVector theta_m = tape.final_;
  return {std::move(theta_m), std::move(tape)};
}

std::vector<StepDataGradient> truncated_meta_gradient(const UnrollTape& tape, const ParamLoss& meta_loss) {
  require(tape.valid(), ErrorKind::kContract, "truncated_meta_gradient: tape was not produced by unroll_sgd");
  const Window w = tape.window();
  require(w.end() <= tape.step_count(), ErrorKind::kContract, "truncated_meta_gradient: window exceeds tape");

  std::vector<Var> leaves;
  for (const auto& s : tape.steps()) {
    if (s.in_window) {
      require(s.inputs.defined() && s.inputs.requires_grad(), ErrorKind::kContract,
              "truncated_meta_gradient: window step without recorded data");
      leaves.push_back(s.inputs);
      leaves.push_back(s.target_logits);
    }
  }
  const Var l = meta_loss(tape.final_param_vars());
  if (!std::isfinite(l.item())) fail(ErrorKind::kNumerical, "non-finite meta loss");
  const std::vector<Var> g = leaves.empty() ? std::vector<Var>{} : ad::grad(l, leaves, false);

  std::vector<StepDataGradient> out(tape.step_count());
  std::size_t k = 0;
  for (std::size_t m = 0; m < tape.step_count(); ++m) {
    const auto& s = tape.steps()[m];
    out[m].batch_id = s.batch_id;
    if (!s.in_window) {
      out[m].d_inputs = Matrix(s.batch_rows, s.input_cols);
      out[m].d_target_logits = Matrix(s.batch_rows, s.logit_cols);
    } else {
      out[m].d_inputs = g[k++].value();
      out[m].d_target_logits = g[k++].value();
      if (!out[m].d_inputs.all_finite() || !out[m].d_target_logits.all_finite()) {
        fail(ErrorKind::kNumerical, "non-finite meta-gradient at step " + std::to_string(m + 1));
      }
    }
  }
  return out;
}

}  // namespace sdist::diffgrad
