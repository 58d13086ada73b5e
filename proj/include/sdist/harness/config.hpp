// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sdist/bilevel/distill.hpp"
#include "sdist/boundary/init.hpp"
#include "sdist/datastream/csv_log.hpp"
#include "sdist/datastream/generator.hpp"
#include "sdist/datastream/partition.hpp"
#include "sdist/recmodel/model.hpp"
#include "sdist/recmodel/train.hpp"

namespace sdist::harness {

struct DataConfig {
  std::string source = "generator";  // "generator" or "csv"
  std::string path;                  // csv source only
  data::LogSchema schema;
  data::StreamLayout layout;         // required for csv sources
};

struct CandidateConfig {
  std::size_t epochs = 8;       // budget on distilled data
  double distill_lr = 1e-3;     // dense params on distilled data
  double lr = 1e-3;             // training on real records
  std::size_t batch_size = 512;
  std::size_t distill_batch_size = 64;  // distilled sets are small; 512 leaves a handful of steps
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  bool deterministic = false;
  DataConfig data;
  data::GeneratorConfig generator;

  std::size_t dim = 32;
  std::vector<std::size_t> hidden = {128, 64};
  model::Arch reference_arch = model::Arch::kMlp;
  std::vector<model::Arch> candidate_archs = {model::Arch::kMlp, model::Arch::kCross};
  model::TrainConfig reference;

  bilevel::DistillConfig distill;
  boundary::SelectionWindow selection;
  std::size_t probe_size = 256;
  double min_group_factor = 2.0;

  CandidateConfig candidate;
  std::vector<std::string> methods = {"full_data", "cold_start", "warmup_start", "random", "el2n", "kmeans", "diet"};
  double compression_ratio = 0.02;
  std::size_t kmeans_iterations = 25;
};

/// Method ids accepted in `methods`.
const std::vector<std::string>& known_methods();
bool is_selection_method(const std::string& method);  // random, el2n, kmeans

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
std::string config_to_json(const ExperimentConfig& config);
void validate(const ExperimentConfig& config);

/// Sets the experiment seed; the generator follows it.
void apply_seed(ExperimentConfig& config, std::uint64_t seed);

}  // namespace sdist::harness
