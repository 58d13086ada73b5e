// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#include "sdist/harness/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>

#include "sdist/common/binary_io.hpp"
#include "sdist/common/error.hpp"
#include "sdist/common/hash.hpp"
#include "sdist/common/log.hpp"
#include "sdist/common/rng.hpp"
#include "sdist/datastream/csv_log.hpp"
#include "sdist/harness/baselines.hpp"
#include "sdist/harness/candidate.hpp"

namespace sdist::harness {
namespace {

std::uint64_t method_seed(const ExperimentConfig& c, const std::string& method, model::Arch arch) {
  return derive_seed(c.seed, {0xca7d, fnv1a(method), static_cast<std::uint64_t>(arch)});
}

std::string path_join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

}  // namespace

LoadedStream load_stream(const ExperimentConfig& config) {
  LoadedStream s;
  if (config.data.source == "generator") {
    const auto syn = data::generate_synthetic_stream(config.generator);
    s.parts = data::partition(syn.records, syn.layout);
    s.vocab = syn.vocab_sizes;
    s.tasks = config.generator.tasks;
  } else {
    const auto ingested = data::ingest_csv(config.data.path, config.data.schema);
    s.parts = data::partition(ingested.records, config.data.layout);
    s.vocab = ingested.vocab.sizes();
    s.tasks = config.data.schema.tasks;
  }
  return s;
}

std::uint64_t split_hash(const data::DataBlock& block) {
  Fnv1a h;
  h.pod(block.span.start);
  h.pod(block.span.end);
  for (const auto& r : block.records) {
    h.pod(r.timestamp);
    h.bytes(r.fields.data(), r.fields.size() * sizeof(std::uint32_t));
    h.bytes(r.labels.data(), r.labels.size());
  }
  return h.digest();
}

std::vector<model::ModelCheckpoint> train_reference_models(const ExperimentConfig& config, const LoadedStream& stream) {
  const auto sc = streaming_config(config, stream);
  return bilevel::train_reference(stream.parts.historical, sc.spec, sc.reference, sc.seed);
}

bilevel::StreamingConfig streaming_config(const ExperimentConfig& config, const LoadedStream& stream) {
  bilevel::StreamingConfig sc;
  sc.spec = reference_spec(config, stream.vocab, stream.tasks);
  sc.reference = config.reference;
  sc.reference.epochs = 1;
  sc.distill = config.distill;
  sc.selection = config.selection;
  sc.probe_size = config.probe_size;
  sc.min_group_factor = config.min_group_factor;
  sc.compression_ratio = config.compression_ratio;
  sc.seed = derive_seed(config.seed, {0x5eed});
  return sc;
}

std::vector<boundary::SyntheticMemory> baseline_sets(const std::string& name, const ExperimentConfig& config,
                                                     const LoadedStream& stream,
                                                     std::span<const model::ModelCheckpoint> refs) {
  const auto& blocks = stream.parts.historical;
  require(refs.size() == blocks.size() + 1, ErrorKind::kConfig, "baseline needs phi_0..phi_T");
  const auto block_ckpts = refs.subspan(1);
  const double r = config.compression_ratio;
  Selection sel;
  if (name == "random") {
    sel = baseline_random(blocks, r, derive_seed(config.seed, {0xba5e, 1}));
  } else if (name == "el2n") {
    sel = baseline_el2n(blocks, block_ckpts, r);
  } else if (name == "kmeans") {
    sel = baseline_kmeans(blocks, block_ckpts, r, config.kmeans_iterations, derive_seed(config.seed, {0xba5e, 3}));
  } else {
    fail(ErrorKind::kConfig, "unknown baseline: " + name);
  }
  return selection_to_memory(blocks, block_ckpts, sel);
}

model::ModelCheckpoint train_method(const std::string& method, model::Arch arch, const ExperimentConfig& config,
                                    const LoadedStream& stream, std::span<const model::ModelCheckpoint> refs,
                                    std::span<const boundary::SyntheticMemory> distilled) {
  const auto spec = candidate_spec(config, arch, stream.vocab, stream.tasks);
  const auto seed = method_seed(config, method, arch);
  const auto& P = stream.parts;
  if (method == "full_data") return train_full_data(spec, P.historical, P.subsequent, config.candidate, seed);
  if (method == "cold_start") return train_cold_start(spec, P.subsequent, config.candidate, seed);
  require(!refs.empty(), ErrorKind::kConfig, method + " needs the reference checkpoints");
  const auto& phi_T = refs.back();
  if (method == "warmup_start") return train_warmup_start(spec, phi_T, P.subsequent, config.candidate, seed);
  require(method == "diet" || is_selection_method(method), ErrorKind::kConfig, "unknown method: " + method);
  return warmup_train_candidate(spec, distilled, phi_T, P.subsequent, P.validation, config.candidate, seed).ckpt;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const std::string& out_dir, const Progress& progress) {
  validate(config);
  auto say = [&](const std::string& m) {
    if (progress) progress(m);
  };
  const bool write = !out_dir.empty();
  if (write) std::filesystem::create_directories(out_dir);

  ExperimentResult res;
  const LoadedStream stream = load_stream(config);
  Fnv1a train_h;
  for (const auto& b : stream.parts.historical) train_h.pod(split_hash(b));
  train_h.pod(split_hash(stream.parts.subsequent));
  res.train_hash = train_h.digest();
  res.validation_hash = split_hash(stream.parts.validation);
  res.test_hash = split_hash(stream.parts.test);

  auto needs = [&](const std::string& m) {
    return std::find(config.methods.begin(), config.methods.end(), m) != config.methods.end();
  };
  const bool needs_refs = std::any_of(config.methods.begin(), config.methods.end(), [](const std::string& m) {
    return m != "full_data" && m != "cold_start";
  });

  std::vector<model::ModelCheckpoint> refs;
  std::map<std::string, std::vector<boundary::SyntheticMemory>> sets;
  if (needs_refs) {
    say("training reference model");
    refs = train_reference_models(config, stream);
    if (write) {
      for (const auto& c : refs) {
        model::save_checkpoint(path_join(out_dir, "ref_stage" + std::to_string(c.stage) + ".dietckpt"), c);
      }
    }
  }
  const std::size_t width = config.dim * stream.vocab.size();
  if (needs("diet")) {
    say("distilling");
    const auto sc = streaming_config(config, stream);
    auto sr = bilevel::run_streaming_distillation(
        stream.parts.historical, sc,
        [&](std::uint32_t t, const model::ModelCheckpoint&, const bilevel::StageResult& stage) {
          say("stage " + std::to_string(t) + " distilled: " + std::to_string(stage.memory.size()) + " samples");
          if (!write) return;
          boundary::save_memory(path_join(out_dir, "syn_stage" + std::to_string(t) + ".dietsyn"), stage.memory,
                                width, stream.tasks);
          io::write_text(path_join(out_dir, "trace_stage" + std::to_string(t) + ".json"),
                         bilevel::trace_json(stage, sc.distill, t));
        },
        refs);
    sets["diet"] = sr.distilled;
    res.stages = std::move(sr.stages);
    res.quotas = sr.quotas;
    if (write) io::write_text(path_join(out_dir, "efficiency.csv"), efficiency_csv(res.stages));
  }
  for (const std::string name : {"random", "el2n", "kmeans"}) {
    if (!needs(name)) continue;
    say("baseline " + name);
    sets[name] = baseline_sets(name, config, stream, refs);
    if (write) {
      for (std::size_t t = 0; t < sets[name].size(); ++t) {
        boundary::save_memory(
            path_join(out_dir, "baseline_" + name + "_stage" + std::to_string(t + 1) + ".dietsyn"), sets[name][t],
            width, stream.tasks);
      }
    }
  }
  for (const auto& [name, parts] : sets) {
    std::size_t n = 0;
    for (const auto& p : parts) n += p.size();
    res.selected_counts[name] = n;
  }

  for (const auto arch : config.candidate_archs) {
    for (const auto& method : config.methods) {
      MetricsRow row;
      row.method = method;
      row.arch = model::arch_name(arch);
      say("candidate " + method + "/" + row.arch);
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const auto it = sets.find(method);
        const std::span<const boundary::SyntheticMemory> distilled =
            it == sets.end() ? std::span<const boundary::SyntheticMemory>{} : it->second;
        const auto ckpt = train_method(method, arch, config, stream, refs, distilled);
        row.wall_s = config.deterministic
                         ? 0.0
                         : std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const auto ev = evaluate(ckpt, stream.parts.test);
        row.auc = ev.auc;
        row.logloss = ev.logloss;
        if (write) {
          model::save_checkpoint(path_join(out_dir, "candidate_" + method + "_" + row.arch + ".dietckpt"), ckpt);
        }
      } catch (const Error& e) {
        row.failed = true;
        row.error = e.what();
        log::warn("cell " + method + "/" + row.arch + " failed: " + e.what());
      }
      res.rows.push_back(row);
    }
  }
  if (write) io::write_text(path_join(out_dir, "metrics.csv"), metrics_csv(res.rows));
  return res;
}

}  // namespace sdist::harness
