// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "sdist/addressing/addressing.hpp"
#include "sdist/common/error.hpp"
#include "sdist/common/log.hpp"
#include "sdist/recmodel/model.hpp"

using namespace sdist;
using addressing::Anchor;
using addressing::InfluenceMode;
using addressing::PointSet;

namespace {

PointSet points(const Matrix& x, const Matrix& y) { return {x, y}; }

PointSet random_points(std::size_t n, std::size_t d, std::size_t k, Rng& rng) {
  Matrix y(n, k);
  for (auto& v : y.data) v = rng.uniform();
  return {testing::random_matrix(n, d, rng), y};
}

struct Fixture {
  model::DenseNet net;
  ParamVector params;
  Anchor anchor() const { return {&net, &params}; }
};

Fixture random_fixture(std::size_t d, std::vector<std::size_t> hidden, std::size_t k, std::uint64_t seed) {
  model::DenseNet net(model::Arch::kMlp, d, std::move(hidden), k);
  ParamVector p = net.layout();
  Rng rng(seed);
  testing::randomize(p, rng, 0.7);
  return {std::move(net), std::move(p)};
}

// Single affine model, D=2, K=1, all parameters zero: sigma(logit) = 0.5 so a
// target of 0.5 - r gives residual r.
Fixture zero_affine() {
  model::DenseNet net(model::Arch::kMlp, 2, {}, 1);
  ParamVector p = net.layout();
  return {std::move(net), std::move(p)};
}

PointSet one(std::vector<double> h, double residual_at_half) {
  Matrix x(1, h.size());
  x.data = std::move(h);
  Matrix y(1, 1);
  y.data = {0.5 - residual_at_half};
  return {x, y};
}

}  // namespace

TEST_CASE("ghost dot closed form on a hand-set pair") {
  diffgrad::GhostFeatures gx{{0.3}, {1.0, 0.5}};
  diffgrad::GhostFeatures gz{{-0.2}, {1.0, 1.0}};
  CHECK(diffgrad::ghost_dot(gx, gz) == doctest::Approx(-0.15).epsilon(1e-15));

  const Fixture f = zero_affine();
  const PointSet x = one({1.0, 0.5}, 0.3);
  const PointSet z = one({1.0, 1.0}, -0.2);
  CHECK(addressing::influence(f.anchor(), x, z, InfluenceMode::kGhost) == doctest::Approx(-0.15).epsilon(1e-12));
  CHECK(addressing::influence(f.anchor(), x, z, InfluenceMode::kFull) == doctest::Approx(-0.15).epsilon(1e-12));
}

TEST_CASE("orthogonal gradients give zero influence") {
  const Fixture f = zero_affine();
  // h_x . h_z = -1 cancels the bias term.
  const PointSet x = one({1.0, 0.0}, 0.25);
  const PointSet z = one({-1.0, 0.0}, 0.4);
  CHECK(std::abs(addressing::influence(f.anchor(), x, z, InfluenceMode::kFull)) < 1e-15);
  CHECK(std::abs(addressing::influence(f.anchor(), x, z, InfluenceMode::kGhost)) < 1e-15);
}

TEST_CASE("ghost equals full on single affine models") {
  Rng rng(11);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Fixture f = random_fixture(5, {}, 3, 100 + trial);
    const PointSet a = random_points(1, 5, 3, rng);
    const PointSet b = random_points(1, 5, 3, rng);
    const double g = addressing::influence(f.anchor(), a, b, InfluenceMode::kGhost);
    const double full = addressing::influence(f.anchor(), a, b, InfluenceMode::kFull);
    worst = std::max(worst, std::abs(g - full));
  }
  CHECK(worst < 1e-10);

  // Batched sums agree too.
  const Fixture f = random_fixture(4, {}, 2, 7);
  const PointSet src = random_points(9, 4, 2, rng);
  const PointSet dst = random_points(6, 4, 2, rng);
  const auto g = addressing::influence_sums(f.anchor(), src, dst, InfluenceMode::kGhost);
  const auto full = addressing::influence_sums(f.anchor(), src, dst, InfluenceMode::kFull);
  CHECK(testing::max_abs_diff(g, full) < 1e-10);
}

TEST_CASE("symmetry and nonnegative self influence") {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const Fixture f = random_fixture(4, {5}, 2, 300 + trial);
    const PointSet a = random_points(1, 4, 2, rng);
    const PointSet b = random_points(1, 4, 2, rng);
    for (auto mode : {InfluenceMode::kFull, InfluenceMode::kGhost}) {
      const double ab = addressing::influence(f.anchor(), a, b, mode);
      const double ba = addressing::influence(f.anchor(), b, a, mode);
      CHECK(std::abs(ab - ba) <= 1e-12 * std::max(1.0, std::abs(ab)));
    }
    CHECK(addressing::influence(f.anchor(), a, a, InfluenceMode::kFull) >= 0.0);
  }
}

TEST_CASE("influence sums equal the sum of pairwise influences") {
  Rng rng(13);
  const Fixture f = random_fixture(4, {3}, 2, 5);
  const PointSet src = random_points(5, 4, 2, rng);
  const PointSet dst = random_points(4, 4, 2, rng);
  for (auto mode : {InfluenceMode::kFull, InfluenceMode::kGhost}) {
    const auto sums = addressing::influence_sums(f.anchor(), src, dst, mode);
    for (std::size_t j = 0; j < dst.size(); ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < src.size(); ++i) s += addressing::influence(f.anchor(), src.row(i), dst.row(j), mode);
      CHECK(sums[j] == doctest::Approx(s).epsilon(1e-10));
    }
  }
}

TEST_CASE("deficiency and responsibility examples") {
  const Fixture f = zero_affine();
  const PointSet z = one({1.0, 0.0}, 0.2);
  // Influences 0.2*r*(h.z + 1): pick h so the values are 0.4 and -0.1.
  const PointSet m1 = one({1.0, 0.0}, 1.0);    // 0.2*1*(1+1) = 0.4
  const PointSet m2 = one({-0.5, 0.0}, -1.0);  // 0.2*-1*(0.5) = -0.1
  PointSet mem{Matrix(2, 2), Matrix(2, 1)};
  mem.inputs.data = {1.0, 0.0, -0.5, 0.0};
  mem.targets.data = {m1.targets.data[0], m2.targets.data[0]};
  for (auto mode : {InfluenceMode::kFull, InfluenceMode::kGhost}) {
    const auto d = addressing::deficiency(f.anchor(), z, mem, mode);
    REQUIRE(d.size() == 1);
    CHECK(d[0] == doctest::Approx(0.3).epsilon(1e-12));
    const auto empty = addressing::deficiency(f.anchor(), z, PointSet{Matrix(0, 2), Matrix(0, 1)}, mode);
    CHECK(empty == std::vector<double>{0.0});
    const auto r = addressing::responsibility(f.anchor(), mem, z, mode);
    CHECK(r[0] == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(r[1] == doctest::Approx(-0.1).epsilon(1e-12));
  }
  CHECK_THROWS_AS(addressing::responsibility(f.anchor(), mem, PointSet{Matrix(0, 2), Matrix(0, 1)},
                                             InfluenceMode::kGhost),
                  Error);
}

TEST_CASE("deficiency is linear in the memory multiset") {
  Rng rng(14);
  const Fixture f = random_fixture(4, {3}, 2, 6);
  const PointSet batch = random_points(6, 4, 2, rng);
  const PointSet a = random_points(3, 4, 2, rng);
  const PointSet b = random_points(4, 4, 2, rng);
  PointSet ab{Matrix(7, 4), Matrix(7, 2)};
  std::copy(a.inputs.data.begin(), a.inputs.data.end(), ab.inputs.data.begin());
  std::copy(b.inputs.data.begin(), b.inputs.data.end(), ab.inputs.data.begin() + 12);
  std::copy(a.targets.data.begin(), a.targets.data.end(), ab.targets.data.begin());
  std::copy(b.targets.data.begin(), b.targets.data.end(), ab.targets.data.begin() + 6);
  for (auto mode : {InfluenceMode::kFull, InfluenceMode::kGhost}) {
    const auto da = addressing::deficiency(f.anchor(), batch, a, mode);
    const auto db = addressing::deficiency(f.anchor(), batch, b, mode);
    const auto dab = addressing::deficiency(f.anchor(), batch, ab, mode);
    for (std::size_t i = 0; i < batch.size(); ++i) CHECK(dab[i] == doctest::Approx(da[i] + db[i]).epsilon(1e-10));
  }
}

TEST_CASE("utility trivial cases") {
  Rng rng(15);
  const Fixture f = random_fixture(3, {4}, 2, 8);
  const PointSet s = random_points(4, 3, 2, rng);
  const PointSet z = random_points(1, 3, 2, rng);
  CHECK(addressing::utility_exact(f.anchor(), s, z, 0.0) == 0.0);
  CHECK(addressing::utility_first_order(f.anchor(), s, z, 0.0) == 0.0);
  const PointSet none{Matrix(0, 3), Matrix(0, 2)};
  CHECK(addressing::utility_exact(f.anchor(), none, z, 0.1) == 0.0);
  CHECK(addressing::utility_first_order(f.anchor(), none, z, 0.1) == 0.0);
  CHECK_THROWS_AS(addressing::utility_exact(f.anchor(), s, z, -1.0), Error);
}

TEST_CASE("utility exact on a one-weight logistic model") {
  // logit = w*x + b with w = 0.5, b = 0; S = {(x=2, y=1)}, z = (x=1, y=0).
  model::DenseNet net(model::Arch::kMlp, 1, {}, 1);
  ParamVector p = net.layout();
  p.values()[p.layout()[p.index_of("head.W")].offset] = 0.5;
  const Anchor w{&net, &p};
  const PointSet s = points(Matrix(1, 1, 2.0), Matrix(1, 1, 1.0));
  const PointSet z = points(Matrix(1, 1, 1.0), Matrix(1, 1, 0.0));
  const double eta = 0.3;

  const double sig = 1.0 / (1.0 + std::exp(-1.0));
  const double gw = (sig - 1.0) * 2.0;
  const double gb = sig - 1.0;
  const double w1 = 0.5 - eta * gw;
  const double b1 = 0.0 - eta * gb;
  const double before = std::log1p(std::exp(0.5));
  const double after = std::log1p(std::exp(w1 + b1));
  CHECK(addressing::utility_exact(w, s, z, eta) == doctest::Approx(after - before).epsilon(1e-13));
}

TEST_CASE("first-order utility error scales as eta squared") {
  Rng rng(16);
  const double eta = 0.02;
  double ratio_sum = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Fixture f = random_fixture(4, {5}, 2, 500 + trial);
    const PointSet s = random_points(3, 4, 2, rng);
    const PointSet z = random_points(1, 4, 2, rng);
    const double e1 = std::abs(addressing::utility_exact(f.anchor(), s, z, eta) -
                               addressing::utility_first_order(f.anchor(), s, z, eta));
    const double e2 = std::abs(addressing::utility_exact(f.anchor(), s, z, eta / 2) -
                               addressing::utility_first_order(f.anchor(), s, z, eta / 2));
    ratio_sum += e1 / e2;
  }
  const double mean_ratio = ratio_sum / 20.0;
  MESSAGE("mean error ratio " << mean_ratio);
  CHECK(mean_ratio >= 2.5);
  CHECK(mean_ratio <= 6.0);
}

TEST_CASE("first-order utility is additive over disjoint subsets") {
  Rng rng(17);
  const Fixture f = random_fixture(4, {3}, 2, 9);
  const PointSet s = random_points(7, 4, 2, rng);
  const PointSet z = random_points(1, 4, 2, rng);
  const std::vector<std::size_t> i1 = {0, 2, 5};
  const std::vector<std::size_t> i2 = {1, 3, 4, 6};
  const double whole = addressing::utility_first_order(f.anchor(), s, z, 0.1);
  const double parts = addressing::utility_first_order(f.anchor(), s.subset(i1), z, 0.1) +
                       addressing::utility_first_order(f.anchor(), s.subset(i2), z, 0.1);
  CHECK(std::abs(whole - parts) <= 1e-14 * std::max(1.0, std::abs(whole)));
}

TEST_CASE("argmin and argmax match sort oracles with ties") {
  Rng rng(18);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(20);
    for (auto& x : v) x = static_cast<double>(rng.below(5)) - 2.0;  // many ties
    const std::size_t k = rng.below(21);
    CHECK(addressing::argmin_k(v, k) == testing::sort_smallest(v, k));
    CHECK(addressing::argmax_k(v, k) == testing::sort_largest(v, k));
  }
}

TEST_CASE("selection depends on order only") {
  Rng rng(19);
  std::vector<double> v(20);
  for (auto& x : v) x = rng.normal();
  std::vector<double> shifted = v;
  for (auto& x : shifted) x += 3.0;
  CHECK(addressing::select_hard_targets(v, 0.25) == addressing::select_hard_targets(shifted, 0.25));
  CHECK(addressing::select_active_memory(v, 7) == addressing::select_active_memory(shifted, 7));
}

TEST_CASE("hard target count") {
  CHECK(addressing::hard_target_count(100, 0.1) == 10);
  CHECK(addressing::hard_target_count(100, 1.0) == 100);
  for (std::size_t b = 1; b <= 600; ++b) {
    const auto expect = static_cast<std::size_t>(std::ceil(static_cast<double>(b) / 10.0 - 1e-12));
    CHECK(addressing::hard_target_count(b, 0.1) == expect);
  }
  std::vector<double> d(100);
  std::iota(d.begin(), d.end(), 0.0);
  CHECK(addressing::select_hard_targets(d, 0.1).size() == 10);
  CHECK(addressing::select_hard_targets(d, 1.0).size() == 100);
  CHECK_THROWS_AS(addressing::hard_target_count(10, 0.0), Error);
  CHECK_THROWS_AS(addressing::hard_target_count(10, 1.5), Error);
}

TEST_CASE("active memory selection") {
  const std::vector<double> r = {3.0, 1.0, 2.0};
  CHECK(addressing::select_active_memory(r, 2) == std::vector<std::size_t>{0, 2});
  CHECK(addressing::select_active_memory(r, 3).size() == 3);
  log::reset_warning_count();
  CHECK(addressing::select_active_memory(r, 10).size() == 3);
  CHECK(log::warning_count() == 1);
}

TEST_CASE("address composes scoring and selection") {
  Rng rng(20);
  const Fixture f = random_fixture(4, {}, 2, 10);
  const PointSet batch = random_points(20, 4, 2, rng);
  const PointSet mem = random_points(20, 4, 2, rng);
  const auto g = addressing::address(f.anchor(), batch, mem, 0.1, 6, InfluenceMode::kGhost);
  const auto full = addressing::address(f.anchor(), batch, mem, 0.1, 6, InfluenceMode::kFull);
  CHECK(g.hard.size() == 2);
  CHECK(g.active.size() == 6);
  CHECK(g.hard == testing::sort_smallest(g.deficiency, 2));
  CHECK(g.active == testing::sort_largest(g.responsibility, 6));
  CHECK(testing::max_abs_diff(g.deficiency, full.deficiency) < 1e-10);
  CHECK(g.flops == doctest::Approx(40.0 * static_cast<double>(f.params.size())));
}

TEST_CASE("influence rejects batches") {
  Rng rng(21);
  const Fixture f = random_fixture(3, {}, 1, 1);
  const PointSet two = random_points(2, 3, 1, rng);
  CHECK_THROWS_AS(addressing::influence(f.anchor(), two, two.row(0), InfluenceMode::kFull), Error);
  CHECK(addressing::parse_mode("ghost") == InfluenceMode::kGhost);
  CHECK_THROWS_AS(addressing::parse_mode("exact"), Error);
}
