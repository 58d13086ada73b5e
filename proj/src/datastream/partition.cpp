// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#include "sdist/datastream/partition.hpp"

#include <algorithm>
#include <string>

#include "sdist/common/error.hpp"
#include "sdist/common/log.hpp"

namespace sdist::data {

void validate_layout(const StreamLayout& layout) {
  const auto& c = layout.historical_cuts;
  require(c.size() >= 2, ErrorKind::kLayout, "layout needs at least one historical block (two cut points)");
  for (std::size_t i = 1; i < c.size(); ++i) {
    require(c[i] > c[i - 1], ErrorKind::kLayout, "historical cut points must be strictly increasing");
  }
  for (const TimeSpan* s : {&layout.subsequent, &layout.validation, &layout.test}) {
    require(s->end > s->start, ErrorKind::kLayout, "empty span in layout");
  }
  require(c.back() <= layout.subsequent.start, ErrorKind::kLayout, "subsequent span overlaps historical blocks");
  require(layout.subsequent.end <= layout.validation.start, ErrorKind::kLayout, "validation span overlaps subsequent");
  require(layout.validation.end <= layout.test.start, ErrorKind::kLayout, "test span overlaps validation");
}

PartitionedStream partition(const std::vector<InteractionRecord>& records, const StreamLayout& layout) {
  validate_layout(layout);
  PartitionedStream out;
  const auto& cuts = layout.historical_cuts;
  const std::size_t T = cuts.size() - 1;
  out.historical.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    out.historical[t].stage = static_cast<int>(t + 1);
    out.historical[t].span = {cuts[t], cuts[t + 1]};
  }
  out.subsequent.stage = static_cast<int>(T + 1);
  out.subsequent.span = layout.subsequent;
  out.validation.span = layout.validation;
  out.test.span = layout.test;

  for (const auto& r : records) {
    const auto ts = r.timestamp;
    if (ts >= cuts.front() && ts < cuts.back()) {
      const auto it = std::upper_bound(cuts.begin(), cuts.end(), ts);
      out.historical[static_cast<std::size_t>(it - cuts.begin()) - 1].records.push_back(r);
    } else if (layout.subsequent.contains(ts)) {
      out.subsequent.records.push_back(r);
    } else if (layout.validation.contains(ts)) {
      out.validation.records.push_back(r);
    } else if (layout.test.contains(ts)) {
      out.test.records.push_back(r);
    } else {
      ++out.dropped;
    }
  }
  auto by_time = [](const InteractionRecord& a, const InteractionRecord& b) { return a.timestamp < b.timestamp; };
  for (auto& b : out.historical) std::stable_sort(b.records.begin(), b.records.end(), by_time);
  for (DataBlock* b : {&out.subsequent, &out.validation, &out.test}) {
    std::stable_sort(b->records.begin(), b->records.end(), by_time);
  }
  if (out.dropped > 0) log::warn(std::to_string(out.dropped) + " records outside every layout span were dropped");
  return out;
}

}  // namespace sdist::data
