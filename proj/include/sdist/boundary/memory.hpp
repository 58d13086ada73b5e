// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sdist/addressing/addressing.hpp"

namespace sdist::boundary {

enum class Origin : std::uint8_t { kDistilledNew = 0, kRetainedHistory = 1 };

struct SyntheticSample {
  std::vector<double> embedding;  // F*d
  std::vector<double> logits;     // K soft logits
  std::uint32_t origin_stage = 0;
  Origin origin = Origin::kDistilledNew;

  friend bool operator==(const SyntheticSample&, const SyntheticSample&) = default;
};

struct SyntheticMemory {
  std::uint32_t stage = 0;
  std::vector<SyntheticSample> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  /// Inputs are embeddings; targets are sigmoid(soft logits).
  addressing::PointSet points() const;
  std::size_t bytes() const;

  friend bool operator==(const SyntheticMemory&, const SyntheticMemory&) = default;
};

/// Concatenates samples in the given order; stage of the result is the last one's.
SyntheticMemory concatenate(std::span<const SyntheticMemory> parts);

std::vector<std::uint8_t> serialize_memory(const SyntheticMemory& memory, std::size_t width, std::size_t tasks);
SyntheticMemory deserialize_memory(std::span<const std::uint8_t> bytes);
void save_memory(const std::string& path, const SyntheticMemory& memory, std::size_t width, std::size_t tasks);
SyntheticMemory load_memory(const std::string& path);

}  // namespace sdist::boundary
