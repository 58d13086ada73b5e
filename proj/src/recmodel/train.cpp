// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#include "sdist/recmodel/train.hpp"

#include <cmath>

#include "sdist/common/error.hpp"
#include "sdist/datastream/sampler.hpp"
#include "sdist/recmodel/metrics.hpp"

namespace sdist::model {
namespace {

void check_loss(double loss, std::size_t step) {
  if (!std::isfinite(loss)) fail(ErrorKind::kDivergence, "training loss became non-finite at step " + std::to_string(step));
}

}  // namespace

Adam::Adam(std::size_t size, AdamConfig config) : cfg_(config), m_(size, 0.0), v_(size, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  require(params.size() == m_.size() && grad.size() == m_.size(), ErrorKind::kContract, "Adam: size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
    params[i] -= cfg_.lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.eps);
  }
}

TrainStats train_on_records(ModelCheckpoint& ckpt, std::span<const data::InteractionRecord> records,
                            const TrainConfig& config) {
  TrainStats stats;
  if (records.empty() || (!config.train_embeddings && !config.train_dense)) return stats;
  const DenseNet net = ckpt.net();
  const std::size_t F = ckpt.spec.fields();
  const std::size_t K = ckpt.spec.tasks;
  Adam dense_opt(ckpt.dense.size(), config.adam);
  std::vector<Adam> table_opt;
  for (const auto& t : ckpt.tables) table_opt.emplace_back(t.size(), config.adam);

  const data::MinibatchSampler sampler(records.size(), config.batch_size, config.seed);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (const auto& batch : sampler.epoch(epoch)) {
      const std::size_t n = batch.size();
      std::vector<std::size_t> ids(n * F);
      Matrix targets(n, K);
      for (std::size_t i = 0; i < n; ++i) {
        const auto& r = records[batch[i]];
        require(r.fields.size() == F && r.labels.size() == K, ErrorKind::kSchema, "record shape does not match model");
        for (std::size_t f = 0; f < F; ++f) ids[i * F + f] = r.fields[f];
        for (std::size_t k = 0; k < K; ++k) targets(i, k) = r.labels[k];
      }
      std::vector<Var> tables;
      for (const auto& t : ckpt.tables) tables.emplace_back(t, config.train_embeddings);
      const auto dense = ckpt.dense.to_vars(config.train_dense);
      const Var inputs = ad::embedding_lookup(tables, ids, n);
      const Var loss = multitask_bce(net.forward(dense, inputs).logits, Var(std::move(targets)));
      check_loss(loss.item(), stats.steps + 1);

      std::vector<Var> wrt;
      if (config.train_embeddings) wrt.insert(wrt.end(), tables.begin(), tables.end());
      if (config.train_dense) wrt.insert(wrt.end(), dense.begin(), dense.end());
      const auto g = ad::grad(loss, wrt);
      std::size_t k = 0;
      if (config.train_embeddings) {
        for (std::size_t f = 0; f < F; ++f) table_opt[f].step(ckpt.tables[f].data, g[k++].value().data);
      }
      if (config.train_dense) {
        std::vector<double> flat;
        flat.reserve(ckpt.dense.size());
        for (; k < g.size(); ++k) flat.insert(flat.end(), g[k].value().data.begin(), g[k].value().data.end());
        dense_opt.step(ckpt.dense.values(), flat);
      }
      loss_sum += loss.item() * static_cast<double>(n);
      seen += n;
      ++stats.steps;
    }
    stats.records_seen += seen;
    stats.mean_loss = loss_sum / static_cast<double>(seen);
  }
  return stats;
}

TrainStats train_dense(const DenseNet& net, ParamVector& dense, const Matrix& inputs, const Matrix& targets,
                       const TrainConfig& config, Adam* state) {
  require(inputs.rows == targets.rows && targets.cols == net.tasks() && inputs.cols == net.input_width(),
          ErrorKind::kContract, "train_dense: shape mismatch");
  TrainStats stats;
  if (inputs.rows == 0) return stats;
  Adam local(state ? 0 : dense.size(), config.adam);
  Adam& opt = state ? *state : local;
  const data::MinibatchSampler sampler(inputs.rows, config.batch_size, config.seed);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (const auto& batch : sampler.epoch(epoch)) {
      const auto params = dense.to_vars(true);
      const Var loss =
          multitask_bce(net.forward(params, Var(gather_rows(inputs, batch))).logits, Var(gather_rows(targets, batch)));
      check_loss(loss.item(), stats.steps + 1);
      const auto g = ad::grad(loss, params);
      std::vector<double> flat;
      flat.reserve(dense.size());
      for (const auto& gi : g) flat.insert(flat.end(), gi.value().data.begin(), gi.value().data.end());
      opt.step(dense.values(), flat);
      loss_sum += loss.item() * static_cast<double>(batch.size());
      seen += batch.size();
      ++stats.steps;
    }
    stats.records_seen += seen;
    stats.mean_loss = loss_sum / static_cast<double>(seen);
  }
  return stats;
}

ModelCheckpoint continual_update(const ModelCheckpoint& prev, const data::DataBlock& block,
                                 const TrainConfig& config, TrainStats* stats) {
  ModelCheckpoint next = prev;
  TrainConfig one = config;
  one.epochs = 1;
  const TrainStats s = train_on_records(next, block.records, one);
  if (stats) *stats = s;
  next.stage = prev.stage + 1;
  return next;
}

}  // namespace sdist::model
