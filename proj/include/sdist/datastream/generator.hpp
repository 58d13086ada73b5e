// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "sdist/datastream/partition.hpp"
#include "sdist/datastream/records.hpp"

namespace sdist::data {

struct GeneratorConfig {
  std::size_t users = 2000;
  std::size_t items = 3000;
  std::size_t fields = 6;
  std::size_t tasks = 3;
  std::size_t blocks = 3;                // historical blocks T
  std::size_t records_per_block = 30000;
  std::size_t subsequent_records = 30000;
  std::size_t validation_records = 10000;
  std::size_t test_records = 10000;
  double drift = 0.3;
  std::uint64_t seed = 1;
  std::size_t latent_rank = 8;
  std::size_t context_vocab = 24;
  double signal_scale = 1.0;
  double zipf_exponent = 1.05;
  std::int64_t block_seconds = 7 * 86400;
  std::int64_t start_time = 1'700'000'000;
};

/// Hidden logistic model the labels are drawn from.
///   logit_k(x, s) = bias_k + scale * ( sum_f <w_{k,f}, z_f(x_f, s)>
///                                      + <z_0(x_0, s) * c_k, z_1(x_1, s)> )
///   z_f(v, s) = base_{f,v} + drift * s * direction_{f,v}
/// with s the period index (historical blocks, then subsequent, validation, test).
struct GeneratorTruth {
  std::size_t rank = 0;
  double drift = 0.0;
  double scale = 0.0;
  std::vector<double> bias;                           // K
  std::vector<std::vector<double>> base;              // per field: vocab x rank
  std::vector<std::vector<double>> direction;         // per field: vocab x rank
  std::vector<std::vector<double>> field_weights;     // per task: F x rank
  std::vector<std::vector<double>> interaction;       // per task: rank

  double logit(const InteractionRecord& r, std::size_t task, double period) const;
};

struct SyntheticStream {
  std::vector<InteractionRecord> records;  // sorted by timestamp
  GeneratorTruth truth;
  StreamLayout layout;
  std::vector<std::size_t> vocab_sizes;
};

SyntheticStream generate_synthetic_stream(const GeneratorConfig& config);

/// Per-field vocabulary sizes the generator uses.
std::vector<std::size_t> generator_vocab_sizes(const GeneratorConfig& config);

}  // namespace sdist::data
