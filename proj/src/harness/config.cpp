// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#include "sdist/harness/config.hpp"

#include <algorithm>

#include "json.hpp"
#include "sdist/common/binary_io.hpp"
#include "sdist/common/error.hpp"

namespace sdist::harness {
namespace {

using nlohmann::json;

template <class T>
void get(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::kConfig, std::string("config key '") + key + "': " + e.what());
  }
}

data::TimeSpan parse_span(const json& j, const char* key) {
  std::vector<std::int64_t> v;
  get(j, key, v);
  require(v.size() == 2, ErrorKind::kConfig, std::string("layout.") + key + " must be [start, end]");
  return {v[0], v[1]};
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  require(j.is_object(), ErrorKind::kConfig, where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; })) {
      fail(ErrorKind::kConfig, "unknown config key '" + k + "' in " + where);
    }
  }
}

}  // namespace

const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> m = {"full_data", "cold_start", "warmup_start", "random",
                                             "el2n",      "kmeans",     "diet"};
  return m;
}

bool is_selection_method(const std::string& m) { return m == "random" || m == "el2n" || m == "kmeans"; }

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::kConfig, std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, {"seed", "deterministic", "data", "generator", "model", "reference", "distill", "selection",
                 "candidate", "methods", "compression_ratio", "kmeans_iterations"},
             "config");
  ExperimentConfig c;
  get(j, "seed", c.seed);
  c.generator.seed = c.seed;
  get(j, "deterministic", c.deterministic);
  get(j, "compression_ratio", c.compression_ratio);
  get(j, "kmeans_iterations", c.kmeans_iterations);
  get(j, "methods", c.methods);

  if (j.contains("data")) {
    const json& d = j["data"];
    check_keys(d, {"source", "path", "fields", "tasks", "vocab_mode", "hash_buckets", "layout"}, "data");
    get(d, "source", c.data.source);
    get(d, "path", c.data.path);
    get(d, "fields", c.data.schema.fields);
    get(d, "tasks", c.data.schema.tasks);
    std::string mode = "dictionary";
    get(d, "vocab_mode", mode);
    require(mode == "dictionary" || mode == "hashed", ErrorKind::kConfig, "data.vocab_mode must be dictionary|hashed");
    c.data.schema.vocab_mode = mode == "hashed" ? data::VocabMode::kHashed : data::VocabMode::kDictionary;
    get(d, "hash_buckets", c.data.schema.hash_buckets);
    if (d.contains("layout")) {
      const json& l = d["layout"];
      check_keys(l, {"historical_cuts", "subsequent", "validation", "test"}, "data.layout");
      get(l, "historical_cuts", c.data.layout.historical_cuts);
      c.data.layout.subsequent = parse_span(l, "subsequent");
      c.data.layout.validation = parse_span(l, "validation");
      c.data.layout.test = parse_span(l, "test");
    }
  }
  if (j.contains("generator")) {
    const json& g = j["generator"];
    check_keys(g, {"users", "items", "fields", "tasks", "blocks", "records_per_block", "subsequent_records",
                   "validation_records", "test_records", "drift", "latent_rank", "context_vocab", "signal_scale",
                   "zipf_exponent", "block_seconds", "start_time"},
               "generator");
    auto& G = c.generator;
    get(g, "users", G.users);
    get(g, "items", G.items);
    get(g, "fields", G.fields);
    get(g, "tasks", G.tasks);
    get(g, "blocks", G.blocks);
    get(g, "records_per_block", G.records_per_block);
    get(g, "subsequent_records", G.subsequent_records);
    get(g, "validation_records", G.validation_records);
    get(g, "test_records", G.test_records);
    get(g, "drift", G.drift);
    get(g, "latent_rank", G.latent_rank);
    get(g, "context_vocab", G.context_vocab);
    get(g, "signal_scale", G.signal_scale);
    get(g, "zipf_exponent", G.zipf_exponent);
    get(g, "block_seconds", G.block_seconds);
    get(g, "start_time", G.start_time);
  }
  if (j.contains("model")) {
    const json& m = j["model"];
    check_keys(m, {"dim", "hidden", "reference_arch", "candidate_archs"}, "model");
    get(m, "dim", c.dim);
    get(m, "hidden", c.hidden);
    if (m.contains("reference_arch")) c.reference_arch = model::parse_arch(m["reference_arch"].get<std::string>());
    if (m.contains("candidate_archs")) {
      c.candidate_archs.clear();
      for (const auto& a : m["candidate_archs"]) c.candidate_archs.push_back(model::parse_arch(a.get<std::string>()));
    }
  }
  if (j.contains("reference")) {
    const json& r = j["reference"];
    check_keys(r, {"lr", "batch_size"}, "reference");
    get(r, "lr", c.reference.adam.lr);
    get(r, "batch_size", c.reference.batch_size);
  }
  if (j.contains("distill")) {
    const json& d = j["distill"];
    check_keys(d, {"outer_iterations", "inner_steps", "window", "inner_lr", "outer_lr", "label_lr_multiplier",
                   "hard_ratio", "batch_size", "active_size", "addressing", "anchor"},
               "distill");
    auto& D = c.distill;
    get(d, "outer_iterations", D.outer_iterations);
    get(d, "inner_steps", D.inner_steps);
    get(d, "window", D.window);
    get(d, "inner_lr", D.inner_lr);
    get(d, "outer_lr", D.outer_lr);
    get(d, "label_lr_multiplier", D.label_lr_multiplier);
    get(d, "hard_ratio", D.hard_ratio);
    get(d, "batch_size", D.batch_size);
    get(d, "active_size", D.active_size);
    if (d.contains("addressing")) D.addressing = bilevel::parse_addressing_mode(d["addressing"].get<std::string>());
    if (d.contains("anchor")) {
      const auto a = d["anchor"].get<std::string>();
      require(a == "current" || a == "previous", ErrorKind::kConfig, "distill.anchor must be current|previous");
      D.anchor = a == "current" ? bilevel::AnchorChoice::kCurrent : bilevel::AnchorChoice::kPrevious;
    }
  }
  if (j.contains("selection")) {
    const json& s = j["selection"];
    check_keys(s, {"low", "high", "probe_size", "min_group_factor"}, "selection");
    get(s, "low", c.selection.low);
    get(s, "high", c.selection.high);
    get(s, "probe_size", c.probe_size);
    get(s, "min_group_factor", c.min_group_factor);
  }
  if (j.contains("candidate")) {
    const json& s = j["candidate"];
    check_keys(s, {"epochs", "distill_lr", "lr", "batch_size", "distill_batch_size"}, "candidate");
    get(s, "epochs", c.candidate.epochs);
    get(s, "distill_lr", c.candidate.distill_lr);
    get(s, "lr", c.candidate.lr);
    get(s, "batch_size", c.candidate.batch_size);
    get(s, "distill_batch_size", c.candidate.distill_batch_size);
  }
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  const auto bytes = io::read_file(path);
  return parse_config(std::string(bytes.begin(), bytes.end()));
}

std::string config_to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["deterministic"] = c.deterministic;
  j["compression_ratio"] = c.compression_ratio;
  j["kmeans_iterations"] = c.kmeans_iterations;
  j["methods"] = c.methods;
  nlohmann::ordered_json d;
  d["source"] = c.data.source;
  if (!c.data.path.empty()) d["path"] = c.data.path;
  if (c.data.source == "csv") {
    d["fields"] = c.data.schema.fields;
    d["tasks"] = c.data.schema.tasks;
    d["vocab_mode"] = c.data.schema.vocab_mode == data::VocabMode::kHashed ? "hashed" : "dictionary";
    d["hash_buckets"] = c.data.schema.hash_buckets;
    d["layout"] = {{"historical_cuts", c.data.layout.historical_cuts},
                   {"subsequent", {c.data.layout.subsequent.start, c.data.layout.subsequent.end}},
                   {"validation", {c.data.layout.validation.start, c.data.layout.validation.end}},
                   {"test", {c.data.layout.test.start, c.data.layout.test.end}}};
  }
  j["data"] = d;
  const auto& G = c.generator;
  j["generator"] = {{"users", G.users},
                    {"items", G.items},
                    {"fields", G.fields},
                    {"tasks", G.tasks},
                    {"blocks", G.blocks},
                    {"records_per_block", G.records_per_block},
                    {"subsequent_records", G.subsequent_records},
                    {"validation_records", G.validation_records},
                    {"test_records", G.test_records},
                    {"drift", G.drift},
                    {"latent_rank", G.latent_rank},
                    {"context_vocab", G.context_vocab},
                    {"signal_scale", G.signal_scale},
                    {"zipf_exponent", G.zipf_exponent},
                    {"block_seconds", G.block_seconds},
                    {"start_time", G.start_time}};
  std::vector<std::string> archs;
  for (auto a : c.candidate_archs) archs.push_back(model::arch_name(a));
  j["model"] = {{"dim", c.dim},
                {"hidden", c.hidden},
                {"reference_arch", model::arch_name(c.reference_arch)},
                {"candidate_archs", archs}};
  j["reference"] = {{"lr", c.reference.adam.lr}, {"batch_size", c.reference.batch_size}};
  const auto& D = c.distill;
  j["distill"] = {{"outer_iterations", D.outer_iterations},
                  {"inner_steps", D.inner_steps},
                  {"window", D.window},
                  {"inner_lr", D.inner_lr},
                  {"outer_lr", D.outer_lr},
                  {"label_lr_multiplier", D.label_lr_multiplier},
                  {"hard_ratio", D.hard_ratio},
                  {"batch_size", D.batch_size},
                  {"active_size", D.active_size},
                  {"addressing", bilevel::addressing_mode_name(D.addressing)},
                  {"anchor", D.anchor == bilevel::AnchorChoice::kCurrent ? "current" : "previous"}};
  j["selection"] = {{"low", c.selection.low},
                    {"high", c.selection.high},
                    {"probe_size", c.probe_size},
                    {"min_group_factor", c.min_group_factor}};
  j["candidate"] = {{"epochs", c.candidate.epochs},
                    {"distill_lr", c.candidate.distill_lr},
                    {"lr", c.candidate.lr},
                    {"batch_size", c.candidate.batch_size},
                    {"distill_batch_size", c.candidate.distill_batch_size}};
  return j.dump(2) + "\n";
}

void validate(const ExperimentConfig& c) {
  require(c.compression_ratio > 0.0 && c.compression_ratio <= 1.0, ErrorKind::kConfig,
          "compression_ratio must be in (0, 1]");
  require(c.candidate.epochs >= 1, ErrorKind::kConfig, "candidate.epochs must be >= 1");
  require(c.candidate.batch_size >= 1 && c.candidate.distill_batch_size >= 1, ErrorKind::kConfig,
          "candidate batch sizes must be >= 1");
  require(c.dim >= 1, ErrorKind::kConfig, "model.dim must be >= 1");
  require(!c.candidate_archs.empty(), ErrorKind::kConfig, "model.candidate_archs must not be empty");
  require(c.data.source == "generator" || c.data.source == "csv", ErrorKind::kConfig,
          "data.source must be generator|csv");
  if (c.data.source == "csv") {
    require(!c.data.path.empty(), ErrorKind::kConfig, "data.path is required for csv sources");
    data::validate_layout(c.data.layout);
  }
  for (const auto& m : c.methods) {
    const auto& known = known_methods();
    require(std::find(known.begin(), known.end(), m) != known.end(), ErrorKind::kConfig, "unknown method: " + m);
  }
  boundary::validate_window(c.selection);
  bilevel::validate(c.distill);
}

void apply_seed(ExperimentConfig& c, std::uint64_t seed) {
  c.seed = seed;
  c.generator.seed = seed;
}

}  // namespace sdist::harness
