// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: one subcommand per pipeline step. Artifacts live in
// the --out directory; every step can also regenerate its inputs from config.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sdist/common/binary_io.hpp"
#include "sdist/common/error.hpp"
#include "sdist/common/log.hpp"
#include "sdist/datastream/csv_log.hpp"
#include "sdist/harness/baselines.hpp"
#include "sdist/harness/candidate.hpp"
#include "sdist/harness/experiment.hpp"
#include "sdist/harness/report.hpp"
#include "sdist/simd/kernels.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace sdist;

namespace {

struct Common {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out = "out";
  bool deterministic = false;
  bool verbose = false;
};

harness::ExperimentConfig resolve(const Common& c) {
  harness::ExperimentConfig cfg = c.config_path.empty() ? harness::ExperimentConfig{}
                                                        : harness::load_config(c.config_path);
  if (c.seed_set) harness::apply_seed(cfg, c.seed);
  if (c.deterministic) cfg.deterministic = true;
  if (cfg.deterministic) simd::force_isa(simd::Isa::kScalar);
  fs::create_directories(c.out);
  return cfg;
}

std::string out_path(const Common& c, const std::string& name) { return (fs::path(c.out) / name).string(); }

void print(const ordered_json& j) { std::cout << j.dump(2) << '\n'; }

std::vector<model::ModelCheckpoint> load_refs(const Common& c, std::size_t blocks) {
  std::vector<model::ModelCheckpoint> refs;
  for (std::size_t t = 0; t <= blocks; ++t) {
    const auto p = out_path(c, "ref_stage" + std::to_string(t) + ".dietckpt");
    if (!fs::exists(p)) fail(ErrorKind::kIo, "missing " + p + " (run train-ref first)");
    refs.push_back(model::load_checkpoint(p));
  }
  return refs;
}

std::vector<boundary::SyntheticMemory> load_sets(const Common& c, const std::string& prefix, std::size_t blocks) {
  std::vector<boundary::SyntheticMemory> sets;
  for (std::size_t t = 1; t <= blocks; ++t) {
    const auto p = out_path(c, prefix + std::to_string(t) + ".dietsyn");
    if (!fs::exists(p)) fail(ErrorKind::kIo, "missing " + p);
    sets.push_back(boundary::load_memory(p));
  }
  return sets;
}

std::string set_prefix(const std::string& method) {
  if (method == "diet") return "syn_stage";
  return "baseline_" + method + "_stage";
}

ordered_json layout_json(const data::StreamLayout& l) {
  return {{"historical_cuts", l.historical_cuts},
          {"subsequent", {l.subsequent.start, l.subsequent.end}},
          {"validation", {l.validation.start, l.validation.end}},
          {"test", {l.test.start, l.test.end}}};
}

int cmd_generate(const Common& c) {
  const auto cfg = resolve(c);
  const auto syn = data::generate_synthetic_stream(cfg.generator);
  data::export_csv(out_path(c, "stream.csv"), syn.records, cfg.generator.fields, cfg.generator.tasks);
  io::write_text(out_path(c, "layout.json"), layout_json(syn.layout).dump(2) + "\n");
  io::write_text(out_path(c, "config.json"), harness::config_to_json(cfg));
  print({{"records", syn.records.size()}, {"stream", out_path(c, "stream.csv")}});
  return 0;
}

int cmd_ingest(const Common& c) {
  const auto cfg = resolve(c);
  const auto s = harness::load_stream(cfg);
  ordered_json j;
  std::vector<std::size_t> blocks;
  for (const auto& b : s.parts.historical) blocks.push_back(b.size());
  j["historical"] = blocks;
  j["subsequent"] = s.parts.subsequent.size();
  j["validation"] = s.parts.validation.size();
  j["test"] = s.parts.test.size();
  j["dropped"] = s.parts.dropped;
  j["vocab"] = s.vocab;
  j["test_hash"] = harness::split_hash(s.parts.test);
  io::write_text(out_path(c, "ingest.json"), j.dump(2) + "\n");
  print(j);
  return 0;
}

int cmd_train_ref(const Common& c) {
  const auto cfg = resolve(c);
  const auto s = harness::load_stream(cfg);
  const auto refs = harness::train_reference_models(cfg, s);
  ordered_json stages = ordered_json::array();
  for (const auto& r : refs) {
    const auto p = out_path(c, "ref_stage" + std::to_string(r.stage) + ".dietckpt");
    model::save_checkpoint(p, r);
    stages.push_back(p);
  }
  print({{"checkpoints", stages}});
  return 0;
}

int cmd_distill(const Common& c) {
  const auto cfg = resolve(c);
  const auto s = harness::load_stream(cfg);
  const auto refs = load_refs(c, s.parts.historical.size());
  const auto sc = harness::streaming_config(cfg, s);
  const std::size_t width = cfg.dim * s.vocab.size();
  const auto res = bilevel::run_streaming_distillation(
      s.parts.historical, sc,
      [&](std::uint32_t t, const model::ModelCheckpoint&, const bilevel::StageResult& stage) {
        boundary::save_memory(out_path(c, "syn_stage" + std::to_string(t) + ".dietsyn"), stage.memory, width, s.tasks);
        io::write_text(out_path(c, "trace_stage" + std::to_string(t) + ".json"), bilevel::trace_json(stage, sc.distill, t));
      },
      refs);
  io::write_text(out_path(c, "efficiency.csv"), harness::efficiency_csv(res.stages));
  std::vector<std::size_t> sizes;
  for (const auto& m : res.distilled) sizes.push_back(m.size());
  print({{"quotas", res.quotas}, {"distilled", sizes}});
  return 0;
}

int cmd_baseline(const Common& c, const std::string& name) {
  const auto cfg = resolve(c);
  const auto s = harness::load_stream(cfg);
  const auto refs = load_refs(c, s.parts.historical.size());
  const auto sets = harness::baseline_sets(name, cfg, s, refs);
  std::vector<std::size_t> sizes;
  for (std::size_t t = 0; t < sets.size(); ++t) {
    boundary::save_memory(out_path(c, set_prefix(name) + std::to_string(t + 1) + ".dietsyn"), sets[t],
                          cfg.dim * s.vocab.size(), s.tasks);
    sizes.push_back(sets[t].size());
  }
  print({{"baseline", name}, {"selected", sizes}});
  return 0;
}

int cmd_train_candidate(const Common& c, const std::string& method, const std::string& arch_name) {
  const auto cfg = resolve(c);
  const auto arch = model::parse_arch(arch_name);
  const auto s = harness::load_stream(cfg);
  std::vector<model::ModelCheckpoint> refs;
  std::vector<boundary::SyntheticMemory> sets;
  if (method != "full_data" && method != "cold_start") refs = load_refs(c, s.parts.historical.size());
  if (method == "diet" || harness::is_selection_method(method)) {
    sets = load_sets(c, set_prefix(method), s.parts.historical.size());
  }
  const auto t0 = std::chrono::steady_clock::now();
  const auto ckpt = harness::train_method(method, arch, cfg, s, refs, sets);
  const double wall =
      cfg.deterministic ? 0.0 : std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto stem = "candidate_" + method + "_" + arch_name;
  model::save_checkpoint(out_path(c, stem + ".dietckpt"), ckpt);
  io::write_text(out_path(c, stem + ".json"), ordered_json({{"wall_s", wall}}).dump() + "\n");
  print({{"checkpoint", out_path(c, stem + ".dietckpt")}, {"wall_s", wall}});
  return 0;
}

harness::MetricsRow evaluate_cell(const Common& c, const data::DataBlock& test, const std::string& method,
                                  const std::string& arch) {
  harness::MetricsRow row;
  row.method = method;
  row.arch = arch;
  const auto stem = "candidate_" + method + "_" + arch;
  try {
    const auto p = out_path(c, stem + ".dietckpt");
    if (!fs::exists(p)) fail(ErrorKind::kIo, "missing " + p);
    const auto ev = harness::evaluate(model::load_checkpoint(p), test);
    row.auc = ev.auc;
    row.logloss = ev.logloss;
    const auto side = out_path(c, stem + ".json");
    if (fs::exists(side)) {
      const auto bytes = io::read_file(side);
      row.wall_s = nlohmann::json::parse(std::string(bytes.begin(), bytes.end())).value("wall_s", 0.0);
    }
  } catch (const Error& e) {
    row.failed = true;
    row.error = e.what();
  }
  return row;
}

int cmd_evaluate(const Common& c, const std::string& method, const std::string& arch) {
  const auto cfg = resolve(c);
  const auto s = harness::load_stream(cfg);
  const auto row = evaluate_cell(c, s.parts.test, method, arch);
  if (row.failed) fail(ErrorKind::kIo, row.error);
  ordered_json j{{"method", method}, {"arch", arch}, {"auc", row.auc}, {"logloss", row.logloss}};
  io::write_text(out_path(c, "eval_" + method + "_" + arch + ".json"), j.dump(2) + "\n");
  print(j);
  return 0;
}

int cmd_report(const Common& c) {
  const auto cfg = resolve(c);
  const auto s = harness::load_stream(cfg);
  std::vector<harness::MetricsRow> rows;
  for (const auto arch : cfg.candidate_archs) {
    for (const auto& m : cfg.methods) rows.push_back(evaluate_cell(c, s.parts.test, m, model::arch_name(arch)));
  }
  const auto csv = harness::metrics_csv(rows);
  io::write_text(out_path(c, "metrics.csv"), csv);
  std::cout << csv;
  return 0;
}

int cmd_run(const Common& c) {
  const auto cfg = resolve(c);
  const auto res = harness::run_experiment(cfg, c.out, [&](const std::string& m) {
    if (c.verbose) std::cerr << m << '\n';
  });
  std::cout << harness::metrics_csv(res.rows);
  return 0;
}

int cmd_estimate_cost(double samples, double flops, double mfu, double peak) {
  const auto e = harness::estimate_cost(samples, flops, mfu, peak);
  print({{"total_flops", e.total_flops}, {"gpu_hours", e.gpu_hours}});
  return 0;
}

int cmd_consistency(const Common& c, const std::vector<std::string>& inputs, const std::string& full_method) {
  fs::create_directories(c.out);
  std::vector<harness::ConsistencyPoint> points;
  for (const auto& path : inputs) {
    const auto bytes = io::read_file(path);
    const auto rows = harness::parse_metrics_csv(std::string(bytes.begin(), bytes.end()));
    for (const auto& r : rows) {
      if (r.failed || r.method == full_method) continue;
      const auto full = std::find_if(rows.begin(), rows.end(), [&](const harness::MetricsRow& f) {
        return f.method == full_method && f.arch == r.arch && !f.failed;
      });
      if (full == rows.end()) continue;
      points.push_back({full->auc, r.auc, r.method});
    }
  }
  const auto rep = harness::consistency_report(points);
  io::write_text(out_path(c, "consistency.csv"), rep.csv);
  print({{"points", points.size()}, {"pearson", rep.pearson}, {"spearman", rep.spearman},
         {"csv", out_path(c, "consistency.csv")}});
  return 0;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "JSON experiment config");
  app->add_option_function<std::uint64_t>("--seed", [&c](const std::uint64_t& s) {
    c.seed = s;
    c.seed_set = true;
  }, "Experiment seed (overrides the config)");
  app->add_option("--out", c.out, "Artifact directory")->capture_default_str();
  app->add_flag("--deterministic", c.deterministic, "Scalar kernels, zero wall times");
  app->add_flag("-v,--verbose", c.verbose, "Progress on stderr");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming dataset distillation for multi-task recommendation"};
  app.require_subcommand(1);
  Common c;
  std::string method, arch, baseline_name, full_method = "full_data";
  double samples = 0, flops = 0, mfu = 0, peak = 0;
  std::vector<std::string> inputs;

  auto* gen = app.add_subcommand("generate", "Write a synthetic interaction stream");
  auto* ing = app.add_subcommand("ingest", "Parse and partition the configured stream");
  auto* ref = app.add_subcommand("train-ref", "Continually train the reference model, one checkpoint per stage");
  auto* dis = app.add_subcommand("distill", "Streaming distillation over the historical blocks");
  auto* bas = app.add_subcommand("baseline", "Selection baseline as embedding/soft-label sets");
  bas->add_option("name", baseline_name, "random | el2n | kmeans")->required();
  auto* tc = app.add_subcommand("train-candidate", "Train one candidate model");
  auto* ev = app.add_subcommand("evaluate", "Evaluate one candidate on the test split");
  for (auto* s : {tc, ev}) {
    s->add_option("--method", method, "full_data | cold_start | warmup_start | random | el2n | kmeans | diet")
        ->required();
    s->add_option("--arch", arch, "mlp | cross")->required();
  }
  auto* rep = app.add_subcommand("report", "Evaluate every configured cell into metrics.csv");
  auto* run = app.add_subcommand("run", "Whole experiment in one process");
  auto* cost = app.add_subcommand("estimate-cost", "Training FLOPs and GPU hours");
  cost->add_option("--samples", samples, "Training samples D")->required();
  cost->add_option("--flops", flops, "FLOPs per sample F")->required();
  cost->add_option("--mfu", mfu, "Model FLOP utilisation (fraction)")->required();
  cost->add_option("--peak", peak, "Device peak FLOP/s")->required();
  auto* con = app.add_subcommand("consistency", "Reduced-vs-full AUC correlation over metrics files");
  con->add_option("--input", inputs, "metrics.csv files")->required();
  con->add_option("--full-method", full_method, "Reference method id")->capture_default_str();
  for (auto* s : {gen, ing, ref, dis, bas, tc, ev, rep, run, con}) add_common(s, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  if (c.verbose) log::set_level(log::Level::kInfo);

  try {
    if (*gen) return cmd_generate(c);
    if (*ing) return cmd_ingest(c);
    if (*ref) return cmd_train_ref(c);
    if (*dis) return cmd_distill(c);
    if (*bas) return cmd_baseline(c, baseline_name);
    if (*tc) return cmd_train_candidate(c, method, arch);
    if (*ev) return cmd_evaluate(c, method, arch);
    if (*rep) return cmd_report(c);
    if (*run) return cmd_run(c);
    if (*cost) return cmd_estimate_cost(samples, flops, mfu, peak);
    if (*con) return cmd_consistency(c, inputs, full_method);
  } catch (const Error& e) {
    std::cerr << ordered_json({{"error", {{"kind", error_kind_name(e.kind())}, {"message", e.what()}}}}).dump()
              << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << ordered_json({{"error", {{"kind", "internal"}, {"message", e.what()}}}}).dump() << '\n';
    return 1;
  }
  return 0;
}
