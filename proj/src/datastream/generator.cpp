// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#include "sdist/datastream/generator.hpp"

#include <algorithm>
#include <cmath>

#include "sdist/common/error.hpp"
#include "sdist/common/rng.hpp"

namespace sdist::data {
namespace {

std::vector<double> normal_vector(std::size_t n, double sd, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = sd * rng.normal();
  return v;
}

// Cumulative Zipf weights over a randomly permuted id space.
struct ZipfTable {
  std::vector<double> cdf;
  std::vector<std::uint32_t> ids;

  ZipfTable(std::size_t n, double exponent, Rng& rng) : cdf(n), ids(n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += 1.0 / std::pow(static_cast<double>(i + 1), exponent);
      cdf[i] = acc;
    }
    for (auto& c : cdf) c /= acc;
    for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<std::uint32_t>(i);
    rng.shuffle(ids);
  }

  std::uint32_t draw(Rng& rng) const {
    const double u = rng.uniform();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    return ids[static_cast<std::size_t>(it - cdf.begin())];
  }
};

double latent(const GeneratorTruth& g, std::size_t field, std::uint32_t id, std::size_t r, double period) {
  const std::size_t i = static_cast<std::size_t>(id) * g.rank + r;
  return g.base[field][i] + g.drift * period * g.direction[field][i];
}

}  // namespace

double GeneratorTruth::logit(const InteractionRecord& rec, std::size_t task, double period) const {
  const std::size_t F = base.size();
  const auto& w = field_weights[task];
  double s = 0.0;
  for (std::size_t f = 0; f < F; ++f) {
    for (std::size_t r = 0; r < rank; ++r) s += w[f * rank + r] * latent(*this, f, rec.fields[f], r, period);
  }
  const auto& c = interaction[task];
  for (std::size_t r = 0; r < rank; ++r) {
    s += latent(*this, 0, rec.fields[0], r, period) * c[r] * latent(*this, 1, rec.fields[1], r, period);
  }
  return bias[task] + scale * s;
}

std::vector<std::size_t> generator_vocab_sizes(const GeneratorConfig& config) {
  std::vector<std::size_t> v(config.fields, config.context_vocab);
  if (config.fields > 0) v[0] = config.users;
  if (config.fields > 1) v[1] = config.items;
  return v;
}

SyntheticStream generate_synthetic_stream(const GeneratorConfig& cfg) {
  require(cfg.fields >= 2, ErrorKind::kConfig, "generator needs at least two fields (user, item)");
  require(cfg.tasks >= 1 && cfg.tasks <= 32, ErrorKind::kConfig, "generator tasks must be in [1, 32]");
  require(cfg.blocks >= 1, ErrorKind::kConfig, "generator needs at least one historical block");
  require(cfg.users >= 1 && cfg.items >= 1 && cfg.context_vocab >= 1 && cfg.latent_rank >= 1, ErrorKind::kConfig,
          "generator vocabularies and rank must be positive");
  require(cfg.block_seconds >= 7, ErrorKind::kConfig, "block_seconds must be >= 7");

  SyntheticStream out;
  out.vocab_sizes = generator_vocab_sizes(cfg);
  Rng rng(derive_seed(cfg.seed, {0x6e4}));

  GeneratorTruth& g = out.truth;
  g.rank = cfg.latent_rank;
  g.drift = cfg.drift;
  g.scale = cfg.signal_scale;
  const double rank = static_cast<double>(cfg.latent_rank);
  for (std::size_t f = 0; f < cfg.fields; ++f) {
    g.base.push_back(normal_vector(out.vocab_sizes[f] * cfg.latent_rank, 1.0, rng));
    g.direction.push_back(normal_vector(out.vocab_sizes[f] * cfg.latent_rank, 1.0, rng));
  }
  const double wsd = 1.0 / std::sqrt(rank * static_cast<double>(cfg.fields));
  const auto shared = normal_vector(cfg.fields * cfg.latent_rank, wsd, rng);
  for (std::size_t k = 0; k < cfg.tasks; ++k) {
    g.bias.push_back(-1.0 - 0.7 * static_cast<double>(k));
    auto own = normal_vector(cfg.fields * cfg.latent_rank, wsd, rng);
    for (std::size_t i = 0; i < own.size(); ++i) own[i] = 0.6 * shared[i] + 0.8 * own[i];
    g.field_weights.push_back(std::move(own));
    g.interaction.push_back(normal_vector(cfg.latent_rank, 1.0 / std::sqrt(rank), rng));
  }

  const ZipfTable users(cfg.users, cfg.zipf_exponent, rng);
  const ZipfTable items(cfg.items, cfg.zipf_exponent, rng);

  const std::int64_t bs = cfg.block_seconds;
  const std::int64_t day = bs / 7;
  const std::int64_t t0 = cfg.start_time;
  const auto T = static_cast<std::int64_t>(cfg.blocks);
  StreamLayout& L = out.layout;
  for (std::int64_t t = 0; t <= T; ++t) L.historical_cuts.push_back(t0 + t * bs);
  L.subsequent = {t0 + T * bs, t0 + (T + 1) * bs};
  L.validation = {L.subsequent.end, L.subsequent.end + day};
  L.test = {L.validation.end, L.validation.end + day};

  auto emit = [&](TimeSpan span, std::size_t count) {
    std::vector<std::int64_t> times(count);
    const auto width = static_cast<std::uint64_t>(span.end - span.start);
    for (auto& ts : times) ts = span.start + static_cast<std::int64_t>(rng.below(width));
    std::sort(times.begin(), times.end());
    for (const auto ts : times) {
      InteractionRecord r;
      r.timestamp = ts;
      r.fields.resize(cfg.fields);
      r.fields[0] = users.draw(rng);
      r.fields[1] = items.draw(rng);
      for (std::size_t f = 2; f < cfg.fields; ++f) r.fields[f] = static_cast<std::uint32_t>(rng.below(cfg.context_vocab));
      const double period = static_cast<double>(ts - t0) / static_cast<double>(bs);
      r.labels.resize(cfg.tasks);
      for (std::size_t k = 0; k < cfg.tasks; ++k) {
        const double p = 1.0 / (1.0 + std::exp(-g.logit(r, k, period)));
        r.labels[k] = rng.uniform() < p ? 1 : 0;
      }
      out.records.push_back(std::move(r));
    }
  };
  for (std::size_t t = 0; t < cfg.blocks; ++t) emit({L.historical_cuts[t], L.historical_cuts[t + 1]}, cfg.records_per_block);
  emit(L.subsequent, cfg.subsequent_records);
  emit(L.validation, cfg.validation_records);
  emit(L.test, cfg.test_records);
  return out;
}

}  // namespace sdist::data
