// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace sdist::data {

/// One logged interaction: F categorical ids, K binary labels.
struct InteractionRecord {
  std::int64_t timestamp = 0;
  std::vector<std::uint32_t> fields;
  std::vector<std::uint8_t> labels;

  friend bool operator==(const InteractionRecord&, const InteractionRecord&) = default;
};

/// Half-open time interval [start, end).
struct TimeSpan {
  std::int64_t start = 0;
  std::int64_t end = 0;
  bool contains(std::int64_t t) const { return t >= start && t < end; }
  friend bool operator==(const TimeSpan&, const TimeSpan&) = default;
};

/// Temporally contiguous, timestamp-ordered records of one stage.
struct DataBlock {
  int stage = 0;
  TimeSpan span;
  std::vector<InteractionRecord> records;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

/// Label vector packed into a bitmask (task k -> bit k). K <= 32.
std::uint32_t label_key(std::span<const std::uint8_t> labels);

/// Record indices per label combination, keyed by label_key. Empty groups
/// are absent; within a group indices keep block order.
std::map<std::uint32_t, std::vector<std::size_t>> group_by_label_combination(const DataBlock& block);

/// Checks field/label arity and label values; vocab is per-field size.
void validate_record(const InteractionRecord& r, std::span<const std::size_t> vocab, std::size_t tasks);

}  // namespace sdist::data
