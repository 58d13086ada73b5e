// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#include "sdist/bilevel/distill.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

#include "sdist/common/error.hpp"
#include "sdist/common/log.hpp"
#include "sdist/datastream/sampler.hpp"
#include "sdist/recmodel/metrics.hpp"

namespace sdist::bilevel {
namespace {

struct Summary {
  double min = 0.0, mean = 0.0, max = 0.0;
};

Summary summarize(std::span<const double> v) {
  Summary s;
  if (v.empty()) return s;
  s.min = *std::min_element(v.begin(), v.end());
  s.max = *std::max_element(v.begin(), v.end());
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  return s;
}

diffgrad::InnerBatch gather_batch(const boundary::SyntheticMemory& memory, std::span<const std::size_t> rows,
                                  std::size_t id) {
  const std::size_t D = memory.samples.front().embedding.size();
  const std::size_t K = memory.samples.front().logits.size();
  diffgrad::InnerBatch b{Matrix(rows.size(), D), Matrix(rows.size(), K), id};
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& s = memory.samples[rows[r]];
    std::copy(s.embedding.begin(), s.embedding.end(), b.inputs.row_span(r).begin());
    std::copy(s.logits.begin(), s.logits.end(), b.target_logits.row_span(r).begin());
  }
  return b;
}

const model::ModelCheckpoint* find_stage(std::span<const model::ModelCheckpoint> cps, std::uint32_t stage) {
  for (const auto& c : cps) {
    if (c.stage == stage) return &c;
  }
  return nullptr;
}

}  // namespace

std::string addressing_mode_name(AddressingMode mode) {
  switch (mode) {
    case AddressingMode::kGhost: return "ghost";
    case AddressingMode::kFull: return "full";
    case AddressingMode::kNone: return "none";
  }
  return "unknown";
}

AddressingMode parse_addressing_mode(const std::string& name) {
  if (name == "ghost") return AddressingMode::kGhost;
  if (name == "full") return AddressingMode::kFull;
  if (name == "none") return AddressingMode::kNone;
  fail(ErrorKind::kConfig, "unknown addressing mode: " + name);
}

void validate(const DistillConfig& c) {
  require(c.window >= 1 && c.window <= c.inner_steps, ErrorKind::kConfig, "distill: need 1 <= W <= M");
  require(c.hard_ratio > 0.0 && c.hard_ratio <= 1.0, ErrorKind::kConfig, "distill: hard ratio must be in (0, 1]");
  require(c.inner_lr >= 0.0 && c.outer_lr >= 0.0 && c.label_lr_multiplier >= 0.0, ErrorKind::kConfig,
          "distill: learning rates must be >= 0");
  require(c.batch_size >= 1, ErrorKind::kConfig, "distill: batch size must be >= 1");
}

ParamVector stage_aware_init(const model::DenseNet& net, std::span<const model::ModelCheckpoint> checkpoints,
                             std::uint32_t t, std::uint64_t seed) {
  require(t >= 1, ErrorKind::kContract, "stage_aware_init: stage must be >= 1");
  if (t == 1) return net.init(seed);
  const auto* prev = find_stage(checkpoints, t - 1);
  if (prev == nullptr) fail(ErrorKind::kConfig, "stage_aware_init: missing checkpoint for stage " + std::to_string(t - 1));
  ParamVector theta = net.layout();
  require(theta.same_layout(prev->dense), ErrorKind::kConfig, "stage_aware_init: proxy layout differs from checkpoint");
  return prev->dense;
}

std::vector<std::vector<std::size_t>> make_inner_batches(std::span<const std::size_t> active, std::size_t steps,
                                                         Rng& rng) {
  std::vector<std::vector<std::size_t>> out(steps);
  if (steps == 0 || active.empty()) return out;
  std::vector<std::size_t> order(active.begin(), active.end());
  rng.shuffle(order);
  const std::size_t per = (order.size() + steps - 1) / steps;
  std::size_t k = 0;
  for (auto& b : out) {
    for (std::size_t r = 0; r < per; ++r) b.push_back(order[k++ % order.size()]);
  }
  return out;
}

diffgrad::InnerLoss synthetic_loss(const model::DenseNet& net) {
  return [&net](std::span<const ad::Var> params, const ad::Var& inputs, const ad::Var& target_logits) {
    return model::multitask_bce(net.forward(params, inputs).logits, ad::sigmoid(target_logits));
  };
}

std::pair<ParamVector, diffgrad::UnrollTape> inner_loop(const model::DenseNet& net, const ParamVector& theta0,
                                                        const boundary::SyntheticMemory& memory,
                                                        const std::vector<std::vector<std::size_t>>& batches,
                                                        double lr, diffgrad::Window window) {
  std::vector<diffgrad::InnerBatch> inner;
  inner.reserve(batches.size());
  for (std::size_t m = 0; m < batches.size(); ++m) inner.push_back(gather_batch(memory, batches[m], m));
  return diffgrad::unroll_sgd(theta0, inner, lr, batches.size(), window, synthetic_loss(net));
}

ad::Var meta_loss(const model::DenseNet& net, std::span<const ad::Var> params, const addressing::PointSet& hard) {
  require(hard.size() > 0, ErrorKind::kContract, "meta_loss: empty hard-target set");
  return model::multitask_bce(net.forward(params, ad::Var(hard.inputs)).logits, ad::Var(hard.targets));
}

double meta_loss_value(const model::DenseNet& net, const ParamVector& params, const addressing::PointSet& hard) {
  ad::NoGradGuard guard;
  const auto vars = params.to_vars(false);
  return meta_loss(net, vars, hard).item();
}

TraceEntry outer_step(boundary::SyntheticMemory& memory, const StageContext& ctx, const DistillConfig& cfg,
                      std::size_t iteration, Counters& counters) {
  require(!memory.empty(), ErrorKind::kContract, "outer_step: empty memory");
  require(ctx.anchor != nullptr && ctx.block != nullptr && !ctx.block->empty(), ErrorKind::kContract,
          "outer_step: missing anchor checkpoint or empty block");
  const model::DenseNet net = ctx.anchor->net();
  const double theta_size = static_cast<double>(ctx.anchor->dense.size());
  Rng rng(derive_seed(cfg.seed, {0x0a7e, ctx.stage, iteration}));

  // Addressing.
  const data::MinibatchSampler sampler(ctx.block->size(), cfg.batch_size, derive_seed(cfg.seed, {0xb7, ctx.stage}));
  const auto batch_idx = sampler.draw(iteration);
  const addressing::PointSet batch = boundary::record_points(*ctx.anchor, ctx.block->records, batch_idx);
  const std::size_t active_target = cfg.active_size == 0 ? cfg.window * cfg.inner_steps : cfg.active_size;

  TraceEntry e;
  e.iteration = iteration;
  std::vector<std::size_t> hard;
  std::vector<std::size_t> active;
  if (cfg.addressing == AddressingMode::kNone) {
    hard.resize(batch.size());
    std::iota(hard.begin(), hard.end(), std::size_t{0});
    active.resize(memory.size());
    std::iota(active.begin(), active.end(), std::size_t{0});
  } else {
    const addressing::Anchor w{&net, &ctx.anchor->dense};
    const auto mode = cfg.addressing == AddressingMode::kFull ? addressing::InfluenceMode::kFull
                                                               : addressing::InfluenceMode::kGhost;
    auto sel = addressing::address(w, batch, memory.points(), cfg.hard_ratio, active_target, mode);
    counters.addressing_flops += sel.flops;
    hard = std::move(sel.hard);
    active = std::move(sel.active);
    const auto d = summarize(sel.deficiency);
    const auto r = summarize(sel.responsibility);
    e.deficiency_min = d.min, e.deficiency_mean = d.mean, e.deficiency_max = d.max;
    e.responsibility_min = r.min, e.responsibility_mean = r.mean, e.responsibility_max = r.max;
  }
  e.hard = hard.size();
  e.active = active.size();

  // Inner loop from the stage-aware proxy.
  const std::size_t M = cfg.inner_steps;
  const std::size_t W = cfg.window;
  const std::size_t u = static_cast<std::size_t>(rng.below(M - W + 1));
  e.window_start = u;
  const auto batches = make_inner_batches(active, M, rng);
  const ParamVector theta0 =
      stage_aware_init(net, ctx.checkpoints, ctx.stage, derive_seed(cfg.seed, {0x1417, ctx.stage, iteration}));
  auto [theta_m, tape] = inner_loop(net, theta0, memory, batches, cfg.inner_lr, {u, W});
  for (std::size_t m = 0; m < M; ++m) {
    const double rows = static_cast<double>(batches[m].size());
    counters.inner_flops += rows * theta_size;
    if (m >= u) counters.meta_flops += rows * theta_size;
  }
  counters.tape_bytes = std::max(counters.tape_bytes, (tape.recorded_steps() + 1) * ctx.anchor->dense.size() * sizeof(double));

  // Meta-gradient on the hard targets and the truncated update.
  const addressing::PointSet hard_points = batch.subset(hard);
  {
    ad::NoGradGuard guard;
    e.meta_loss = meta_loss(net, tape.final_param_vars(), hard_points).item();
  }
  const auto grads = diffgrad::truncated_meta_gradient(
      tape, [&](std::span<const ad::Var> p) { return meta_loss(net, p, hard_points); });
  const double beta = cfg.outer_lr;
  const double beta_y = cfg.label_lr_multiplier * cfg.outer_lr;
  std::vector<bool> touched(memory.size(), false);
  for (std::size_t m = u; m < u + W; ++m) {
    const auto& g = grads[m];
    for (std::size_t r = 0; r < batches[m].size(); ++r) {
      auto& s = memory.samples[batches[m][r]];
      const auto ge = g.d_inputs.row_span(r);
      const auto gy = g.d_target_logits.row_span(r);
      for (std::size_t j = 0; j < s.embedding.size(); ++j) s.embedding[j] -= beta * ge[j];
      for (std::size_t k = 0; k < s.logits.size(); ++k) s.logits[k] -= beta_y * gy[k];
      touched[batches[m][r]] = true;
    }
  }
  e.updated = static_cast<std::size_t>(std::count(touched.begin(), touched.end(), true));
  return e;
}

StageResult distill_stage(const boundary::SyntheticMemory& memory_init, const StageContext& ctx,
                          const DistillConfig& config) {
  validate(config);
  StageResult r;
  r.memory = memory_init;
  r.counters.memory_bytes = memory_init.bytes();
  if (memory_init.empty() || config.outer_iterations == 0) return r;
  try {
    for (std::size_t k = 0; k < config.outer_iterations; ++k) {
      r.trace.push_back(outer_step(r.memory, ctx, config, k, r.counters));
    }
  } catch (const Error& err) {
    if (err.kind() != ErrorKind::kDivergence && err.kind() != ErrorKind::kNumerical) throw;
    r.aborted = true;
    r.error = err.what();
    log::warn("stage " + std::to_string(ctx.stage) + " distillation aborted: " + r.error);
  }
  return r;
}

std::string trace_json(const StageResult& result, const DistillConfig& config, std::uint32_t stage) {
  nlohmann::ordered_json j;
  j["stage"] = stage;
  j["config"] = {{"outer_iterations", config.outer_iterations},
                 {"inner_steps", config.inner_steps},
                 {"window", config.window},
                 {"inner_lr", config.inner_lr},
                 {"outer_lr", config.outer_lr},
                 {"label_lr_multiplier", config.label_lr_multiplier},
                 {"hard_ratio", config.hard_ratio},
                 {"batch_size", config.batch_size},
                 {"addressing", addressing_mode_name(config.addressing)},
                 {"anchor", config.anchor == AnchorChoice::kCurrent ? "current" : "previous"}};
  j["memory_size"] = result.memory.size();
  j["aborted"] = result.aborted;
  if (result.aborted) j["error"] = result.error;
  j["counters"] = {{"addressing_flops", result.counters.addressing_flops},
                   {"inner_flops", result.counters.inner_flops},
                   {"meta_flops", result.counters.meta_flops},
                   {"memory_bytes", result.counters.memory_bytes},
                   {"tape_bytes", result.counters.tape_bytes}};
  auto& it = j["iterations"] = nlohmann::ordered_json::array();
  for (const auto& e : result.trace) {
    it.push_back({{"iteration", e.iteration},
                  {"meta_loss", e.meta_loss},
                  {"window_start", e.window_start},
                  {"hard", e.hard},
                  {"active", e.active},
                  {"updated", e.updated},
                  {"deficiency", {e.deficiency_min, e.deficiency_mean, e.deficiency_max}},
                  {"responsibility", {e.responsibility_min, e.responsibility_mean, e.responsibility_max}}});
  }
  return j.dump(1) + "\n";
}

std::vector<std::size_t> stage_quotas(std::span<const data::DataBlock> blocks, double ratio) {
  require(ratio > 0.0 && ratio <= 1.0, ErrorKind::kConfig, "compression ratio must be in (0, 1]");
  std::size_t total = 0;
  double weighted = 0.0;
  for (std::size_t t = 0; t < blocks.size(); ++t) {
    total += blocks[t].size();
    weighted += (t == 0 ? 1.0 : 2.0) * static_cast<double>(blocks[t].size());
  }
  std::vector<std::size_t> q(blocks.size(), 0);
  if (total == 0) return q;
  const double budget = std::round(ratio * static_cast<double>(total));
  for (std::size_t t = 0; t < blocks.size(); ++t) {
    if (blocks[t].empty()) continue;
    q[t] = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(budget * static_cast<double>(blocks[t].size()) / weighted)));
  }
  return q;
}

std::vector<model::ModelCheckpoint> train_reference(std::span<const data::DataBlock> blocks,
                                                    const model::ModelSpec& spec, const model::TrainConfig& train,
                                                    std::uint64_t seed) {
  std::vector<model::ModelCheckpoint> out;
  out.push_back(model::init_checkpoint(spec, derive_seed(seed, {0xf0})));
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    model::TrainConfig ref = train;
    ref.seed = derive_seed(seed, {0x7e5, i + 1});
    out.push_back(model::continual_update(out.back(), blocks[i], ref));
  }
  return out;
}

StreamingResult run_streaming_distillation(std::span<const data::DataBlock> blocks, const StreamingConfig& config,
                                           const StageCallback& on_stage,
                                           std::span<const model::ModelCheckpoint> references) {
  require(!blocks.empty(), ErrorKind::kConfig, "streaming distillation needs at least one block");
  validate(config.distill);
  StreamingResult out;
  out.quotas = stage_quotas(blocks, config.compression_ratio);
  if (references.empty()) {
    out.checkpoints = train_reference(blocks, config.spec, config.reference, config.seed);
  } else {
    require(references.size() == blocks.size() + 1, ErrorKind::kConfig,
            "need one reference checkpoint per stage plus the initial one");
    for (std::size_t i = 0; i < references.size(); ++i) {
      require(references[i].stage == i, ErrorKind::kConfig, "reference checkpoints out of stage order");
    }
    out.checkpoints.assign(references.begin(), references.end());
  }
  boundary::SyntheticMemory history;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto t = static_cast<std::uint32_t>(i + 1);
    try {
      const model::ModelCheckpoint& phi_t = out.checkpoints[i + 1];

      boundary::InitConfig init;
      init.quota = out.quotas[i];
      init.window = config.selection;
      init.probe_size = config.probe_size;
      init.min_group_factor = config.min_group_factor;
      init.seed = derive_seed(config.seed, {0x1b});
      const auto initialized = boundary::init_stage(blocks[i], phi_t, history, init);

      StageContext ctx;
      ctx.anchor = config.distill.anchor == AnchorChoice::kCurrent ? &phi_t : &out.checkpoints[i];
      ctx.checkpoints = out.checkpoints;
      ctx.block = &blocks[i];
      ctx.stage = t;
      DistillConfig dc = config.distill;
      dc.seed = derive_seed(config.seed, {0xd15});
      StageResult sr = distill_stage(initialized.memory, ctx, dc);
      sr.memory.stage = t;
      history = sr.memory;
      out.distilled.push_back(sr.memory);
      if (on_stage) on_stage(t, phi_t, sr);
      out.stages.push_back(std::move(sr));
    } catch (const Error& err) {
      throw Error(err.kind(), "stage " + std::to_string(t) + ": " + err.what());
    }
  }
  return out;
}

}  // namespace sdist::bilevel
