// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "sdist/datastream/records.hpp"

namespace sdist::data {

/// Chronological split: historical blocks [cuts[i], cuts[i+1]), then the
/// subsequent, validation and test spans.
struct StreamLayout {
  std::vector<std::int64_t> historical_cuts;  // T+1 strictly increasing points
  TimeSpan subsequent;
  TimeSpan validation;
  TimeSpan test;

  std::size_t historical_blocks() const { return historical_cuts.empty() ? 0 : historical_cuts.size() - 1; }
};

/// Layout errors: fewer than two cuts, non-increasing cuts, empty or
/// overlapping or out-of-order spans.
void validate_layout(const StreamLayout& layout);

struct PartitionedStream {
  std::vector<DataBlock> historical;  // stages 1..T
  DataBlock subsequent;
  DataBlock validation;
  DataBlock test;
  std::size_t dropped = 0;
};

/// Assigns each record to the span containing its timestamp. Records outside
/// every span are dropped with a counted warning. Input need not be sorted;
/// each output block is sorted (stable) by timestamp.
PartitionedStream partition(const std::vector<InteractionRecord>& records, const StreamLayout& layout);

}  // namespace sdist::data
