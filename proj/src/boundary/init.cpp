// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#include "sdist/boundary/init.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sdist/common/error.hpp"
#include "sdist/common/rng.hpp"
#include "sdist/recmodel/metrics.hpp"

namespace sdist::boundary {

void validate_window(const SelectionWindow& w) {
  require(w.low >= 0.0 && w.low < w.high && w.high <= 100.0, ErrorKind::kConfig,
          "selection window must satisfy 0 <= low < high <= 100");
}

double el2n(const model::ModelCheckpoint& ckpt, const data::InteractionRecord& record) {
  const auto logits = model::predict(ckpt, model::embed(ckpt, record));
  double s = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    const double e = ad::stable_sigmoid(logits[k]) - record.labels[k];
    s += e * e;
  }
  return std::sqrt(s);
}

std::vector<double> el2n_scores(const model::ModelCheckpoint& ckpt, std::span<const data::InteractionRecord> records) {
  const Matrix logits = model::predict_records(ckpt, records);
  std::vector<double> out(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < logits.cols; ++k) {
      const double e = ad::stable_sigmoid(logits(i, k)) - records[i].labels[k];
      s += e * e;
    }
    out[i] = std::sqrt(s);
  }
  return out;
}

double rank_percentile(std::size_t rank, std::size_t n) {
  return 100.0 * static_cast<double>(rank) / static_cast<double>(n);
}

std::vector<std::size_t> rank_group(std::span<const std::size_t> group, std::span<const double> scores) {
  std::vector<std::size_t> order(group.begin(), group.end());
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b] || (scores[a] == scores[b] && a < b);
  });
  return order;
}

std::vector<std::size_t> eligible_in_window(std::span<const std::size_t> group, std::span<const double> scores,
                                            const SelectionWindow& window) {
  validate_window(window);
  const auto order = rank_group(group, scores);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const double p = rank_percentile(i, order.size());
    if (p >= window.low && p < window.high) out.push_back(order[i]);
  }
  return out;
}

std::vector<std::size_t> select_upper_middle(std::span<const std::size_t> group, std::span<const double> scores,
                                             std::size_t quota, const SelectionWindow& window, std::uint64_t seed) {
  const auto eligible = eligible_in_window(group, scores, window);
  Rng rng(seed);
  std::vector<std::size_t> out;
  for (auto i : sample_without_replacement(eligible.size(), std::min(quota, eligible.size()), rng)) {
    out.push_back(eligible[i]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::map<std::uint32_t, std::size_t> allocate_quota(const std::map<std::uint32_t, std::size_t>& group_sizes,
                                                    const std::map<std::uint32_t, std::size_t>& eligible,
                                                    std::size_t total, double min_group_factor) {
  std::map<std::uint32_t, std::size_t> alloc;
  std::size_t nonempty = 0;
  for (const auto& [key, n] : group_sizes) {
    alloc[key] = 0;
    nonempty += n > 0;
  }
  if (nonempty == 0 || total == 0) return alloc;
  const std::size_t q = total / nonempty;
  const double min_size = min_group_factor * static_cast<double>(q);

  auto elig = [&](std::uint32_t key) {
    const auto it = eligible.find(key);
    return it == eligible.end() ? std::size_t{0} : it->second;
  };
  std::vector<std::uint32_t> pool;  // groups that take part in redistribution
  std::size_t taken = 0;
  for (const auto& [key, n] : group_sizes) {
    if (n == 0) continue;
    alloc[key] = std::min(q, elig(key));
    taken += alloc[key];
    if (static_cast<double>(n) >= min_size) pool.push_back(key);
  }

  std::size_t remaining = total - taken;
  while (remaining > 0) {
    std::vector<std::pair<std::uint32_t, std::size_t>> open;  // (key, spare eligible)
    std::size_t spare_total = 0;
    for (auto key : pool) {
      const std::size_t spare = elig(key) - alloc[key];
      if (spare > 0) {
        open.emplace_back(key, spare);
        spare_total += spare;
      }
    }
    if (open.empty()) break;
    std::size_t given = 0;
    for (const auto& [key, spare] : open) {
      const std::size_t add = std::min(spare, remaining * spare / spare_total);
      alloc[key] += add;
      given += add;
    }
    if (given == 0) {
      // Proportional shares all floored to zero: one each, largest spare first.
      std::stable_sort(open.begin(), open.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
      for (const auto& entry : open) {
        if (given == remaining) break;
        ++alloc[entry.first];
        ++given;
      }
    }
    remaining -= given;
  }
  return alloc;
}

CandidateSet build_candidate_set(const data::DataBlock& block, const model::ModelCheckpoint& ckpt, std::size_t quota,
                                 const SelectionWindow& window, std::uint64_t seed, double min_group_factor) {
  validate_window(window);
  CandidateSet out;
  out.scores = el2n_scores(ckpt, block.records);
  const auto groups = data::group_by_label_combination(block);
  std::map<std::uint32_t, std::size_t> sizes;
  std::map<std::uint32_t, std::vector<std::size_t>> eligible;
  std::map<std::uint32_t, std::size_t> eligible_count;
  for (const auto& [key, members] : groups) {
    sizes[key] = members.size();
    eligible[key] = eligible_in_window(members, out.scores, window);
    eligible_count[key] = eligible[key].size();
  }
  out.per_group = allocate_quota(sizes, eligible_count, quota, min_group_factor);
  for (const auto& [key, count] : out.per_group) {
    const auto& elig = eligible[key];
    Rng rng(derive_seed(seed, {0xca4d, key}));
    for (auto i : sample_without_replacement(elig.size(), count, rng)) out.indices.push_back(elig[i]);
  }
  std::sort(out.indices.begin(), out.indices.end());
  return out;
}

SyntheticSample to_synthetic(const data::InteractionRecord& record, const model::ModelCheckpoint& ckpt) {
  SyntheticSample s;
  s.embedding = model::embed(ckpt, record);
  s.logits = model::predict(ckpt, s.embedding);
  s.origin_stage = ckpt.stage;
  s.origin = Origin::kDistilledNew;
  return s;
}

SyntheticMemory to_synthetic(std::span<const data::InteractionRecord> records, std::span<const std::size_t> indices,
                             const model::ModelCheckpoint& ckpt) {
  SyntheticMemory m;
  m.stage = ckpt.stage;
  if (indices.empty()) return m;
  const Matrix inputs = model::embed_batch(ckpt, records, indices);
  const Matrix logits = model::predict_batch(ckpt.net(), ckpt.dense, inputs);
  m.samples.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    auto& s = m.samples[i];
    const auto e = inputs.row_span(i);
    const auto l = logits.row_span(i);
    s.embedding.assign(e.begin(), e.end());
    s.logits.assign(l.begin(), l.end());
    s.origin_stage = ckpt.stage;
  }
  return m;
}

addressing::PointSet record_points(const model::ModelCheckpoint& ckpt, std::span<const data::InteractionRecord> records,
                                   std::span<const std::size_t> indices) {
  addressing::PointSet p{model::embed_batch(ckpt, records, indices), Matrix(indices.size(), ckpt.spec.tasks)};
  for (std::size_t i = 0; i < indices.size(); ++i) {
    for (std::size_t k = 0; k < ckpt.spec.tasks; ++k) p.targets(i, k) = records[indices[i]].labels[k];
  }
  return p;
}

std::vector<double> historical_alignment(const SyntheticMemory& history, const data::DataBlock& block,
                                         std::span<const std::size_t> candidates, const model::ModelCheckpoint& ckpt,
                                         std::size_t probe_size, std::uint64_t seed) {
  require(!history.empty(), ErrorKind::kContract, "historical_alignment: empty history");
  Rng rng(seed);
  std::vector<std::size_t> probes;
  for (auto i : sample_without_replacement(candidates.size(), std::min(probe_size, candidates.size()), rng)) {
    probes.push_back(candidates[i]);
  }
  std::sort(probes.begin(), probes.end());
  const model::DenseNet net = ckpt.net();
  const addressing::Anchor w{&net, &ckpt.dense};
  return addressing::influence_sums(w, record_points(ckpt, block.records, probes), history.points(),
                                    addressing::InfluenceMode::kGhost);
}

SyntheticMemory fuse_memory(const SyntheticMemory& current, const SyntheticMemory& history,
                            std::span<const double> alpha, std::size_t quota) {
  require(current.size() <= quota, ErrorKind::kContract, "fuse_memory: more current samples than the quota");
  require(alpha.size() == history.size(), ErrorKind::kContract, "fuse_memory: alpha/history size mismatch");
  SyntheticMemory out = current;
  std::vector<std::size_t> order(history.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (alpha[a] != alpha[b]) return alpha[a] > alpha[b];
    const auto sa = history.samples[a].origin_stage;
    const auto sb = history.samples[b].origin_stage;
    if (sa != sb) return sa > sb;
    return a < b;
  });
  order.resize(std::min(quota, order.size()));
  std::sort(order.begin(), order.end());
  for (auto i : order) {
    SyntheticSample s = history.samples[i];
    s.origin = Origin::kRetainedHistory;
    out.samples.push_back(std::move(s));
  }
  return out;
}

InitResult init_stage(const data::DataBlock& block, const model::ModelCheckpoint& ckpt, const SyntheticMemory& history,
                      const InitConfig& config) {
  InitResult r;
  const std::uint32_t t = ckpt.stage;
  if (!block.empty()) {
    r.candidates = build_candidate_set(block, ckpt, config.quota, config.window, derive_seed(config.seed, {0x51, t}),
                                       config.min_group_factor);
  }
  SyntheticMemory current = to_synthetic(block.records, r.candidates.indices, ckpt);
  current.stage = t;
  if (history.empty()) {
    r.memory = std::move(current);
  } else {
    const auto alpha = historical_alignment(history, block, r.candidates.indices, ckpt, config.probe_size,
                                            derive_seed(config.seed, {0xa1, t}));
    r.memory = fuse_memory(current, history, alpha, config.quota);
    r.retained = r.memory.size() - current.size();
  }
  r.memory.stage = t;
  return r;
}

}  // namespace sdist::boundary
