// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#include "sdist/harness/candidate.hpp"

#include "sdist/common/error.hpp"
#include "sdist/common/log.hpp"
#include "sdist/common/rng.hpp"
#include "sdist/recmodel/metrics.hpp"
#include "sdist/recmodel/train.hpp"

namespace sdist::harness {
namespace {

model::TrainConfig record_training(const CandidateConfig& c, std::uint64_t seed) {
  model::TrainConfig t;
  t.adam.lr = c.lr;
  t.batch_size = c.batch_size;
  t.epochs = 1;
  t.seed = seed;
  return t;
}

void inherit_tables(model::ModelCheckpoint& ckpt, const model::ModelCheckpoint& phi_T) {
  require(ckpt.spec.dim == phi_T.spec.dim && ckpt.spec.vocab == phi_T.spec.vocab, ErrorKind::kConfig,
          "candidate embedding shape differs from the reference model");
  ckpt.tables = phi_T.tables;
}

}  // namespace

Evaluation evaluate(const model::ModelCheckpoint& ckpt, const data::DataBlock& split) {
  const Matrix logits = model::predict_records(ckpt, split.records);
  const Matrix labels = model::label_matrix(split.records);
  return {model::auc_multitask(logits, labels).mean, model::logloss(model::sigmoid(logits), labels)};
}

model::ModelSpec reference_spec(const ExperimentConfig& config, std::span<const std::size_t> vocab, std::size_t tasks) {
  return candidate_spec(config, config.reference_arch, vocab, tasks);
}

model::ModelSpec candidate_spec(const ExperimentConfig& config, model::Arch arch, std::span<const std::size_t> vocab,
                                std::size_t tasks) {
  model::ModelSpec s;
  s.arch = arch;
  s.tasks = tasks;
  s.dim = config.dim;
  s.vocab.assign(vocab.begin(), vocab.end());
  s.hidden = config.hidden;
  return s;
}

CandidateRun warmup_train_candidate(const model::ModelSpec& spec, std::span<const boundary::SyntheticMemory> distilled,
                                    const model::ModelCheckpoint& phi_T, const data::DataBlock& subsequent,
                                    const data::DataBlock& validation, const CandidateConfig& config,
                                    std::uint64_t seed) {
  const boundary::SyntheticMemory all = boundary::concatenate(distilled);
  require(!all.empty(), ErrorKind::kContract, "warmup_train_candidate: distilled sets are empty");
  CandidateRun run;
  run.ckpt = model::init_checkpoint(spec, seed);
  inherit_tables(run.ckpt, phi_T);
  run.ckpt.stage = phi_T.stage;

  const model::DenseNet net = run.ckpt.net();
  const auto points = all.points();
  model::TrainConfig tc;
  tc.adam.lr = config.distill_lr;
  tc.batch_size = config.distill_batch_size;
  tc.epochs = 1;
  model::Adam opt(run.ckpt.dense.size(), tc.adam);

  ParamVector best = run.ckpt.dense;
  double best_auc = -1.0;
  bool degenerate = false;
  for (std::size_t e = 1; e <= config.epochs; ++e) {
    tc.seed = derive_seed(seed, {0xe9, e});
    model::train_dense(net, run.ckpt.dense, points.inputs, points.targets, tc, &opt);
    if (degenerate) continue;
    try {
      const double a = evaluate(run.ckpt, validation).auc;
      run.validation_auc.push_back(a);
      if (a > best_auc) {
        best_auc = a;
        best = run.ckpt.dense;
        run.best_epoch = e;
      }
    } catch (const Error& err) {
      if (err.kind() != ErrorKind::kUndefinedMetric) throw;
      degenerate = true;
    }
  }
  if (degenerate) {
    log::warn("validation AUC undefined; keeping the last distilled-data epoch");
    run.best_epoch = config.epochs;
  } else {
    run.ckpt.dense = best;
  }
  model::train_on_records(run.ckpt, subsequent.records, record_training(config, derive_seed(seed, {0xf1})));
  return run;
}

model::ModelCheckpoint train_full_data(const model::ModelSpec& spec, std::span<const data::DataBlock> historical,
                                       const data::DataBlock& subsequent, const CandidateConfig& config,
                                       std::uint64_t seed) {
  model::ModelCheckpoint c = model::init_checkpoint(spec, seed);
  for (std::size_t t = 0; t < historical.size(); ++t) {
    model::train_on_records(c, historical[t].records, record_training(config, derive_seed(seed, {0xfd, t})));
  }
  model::train_on_records(c, subsequent.records, record_training(config, derive_seed(seed, {0xf1})));
  return c;
}

model::ModelCheckpoint train_cold_start(const model::ModelSpec& spec, const data::DataBlock& subsequent,
                                        const CandidateConfig& config, std::uint64_t seed) {
  model::ModelCheckpoint c = model::init_checkpoint(spec, seed);
  model::train_on_records(c, subsequent.records, record_training(config, derive_seed(seed, {0xf1})));
  return c;
}

model::ModelCheckpoint train_warmup_start(const model::ModelSpec& spec, const model::ModelCheckpoint& phi_T,
                                          const data::DataBlock& subsequent, const CandidateConfig& config,
                                          std::uint64_t seed) {
  model::ModelCheckpoint c = model::init_checkpoint(spec, seed);
  inherit_tables(c, phi_T);
  c.stage = phi_T.stage;
  model::train_on_records(c, subsequent.records, record_training(config, derive_seed(seed, {0xf1})));
  return c;
}

}  // namespace sdist::harness
