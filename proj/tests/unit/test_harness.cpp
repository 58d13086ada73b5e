// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "sdist/common/error.hpp"
#include "sdist/harness/baselines.hpp"
#include "sdist/harness/candidate.hpp"
#include "sdist/harness/config.hpp"
#include "sdist/harness/experiment.hpp"
#include "sdist/harness/report.hpp"

using namespace sdist;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

harness::ExperimentConfig reduced() {
  return harness::load_config(std::string(SDIST_SOURCE_DIR) + "/configs/reduced.json");
}

model::ModelSpec small_spec() {
  model::ModelSpec s;
  s.tasks = 2;
  s.dim = 3;
  s.vocab = {7, 6};
  s.hidden = {4};
  return s;
}

data::DataBlock block_of(std::size_t n, Rng& rng) {
  data::DataBlock b;
  for (std::size_t i = 0; i < n; ++i) {
    b.records.push_back({static_cast<std::int64_t>(i),
                         {static_cast<std::uint32_t>(rng.below(7)), static_cast<std::uint32_t>(rng.below(6))},
                         {static_cast<std::uint8_t>(rng.below(2)), static_cast<std::uint8_t>(rng.below(2))}});
  }
  return b;
}

// Textbook Pearson on a tiny sample.
double pearson_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxy += x[i] * y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
  }
  return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

}  // namespace

TEST_CASE("shipped configs parse and round-trip") {
  for (const char* name : {"desk.json", "reduced.json"}) {
    const auto c = harness::load_config(std::string(SDIST_SOURCE_DIR) + "/configs/" + name);
    CHECK_NOTHROW(harness::validate(c));
    const auto text = harness::config_to_json(c);
    CHECK(harness::config_to_json(harness::parse_config(text)) == text);
  }
  const auto desk = harness::load_config(std::string(SDIST_SOURCE_DIR) + "/configs/desk.json");
  CHECK(desk.generator.blocks == 3);
  CHECK(desk.generator.records_per_block == 30000);
  CHECK(desk.compression_ratio == 0.02);
  CHECK(desk.candidate_archs.size() == 2);
}

TEST_CASE("config parsing is strict") {
  auto expect_config_error = [](const std::string& text) {
    try {
      harness::validate(harness::parse_config(text));
      FAIL("expected a configuration error for " << text);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kConfig);
    }
  };
  expect_config_error(R"({"sed": 1})");
  expect_config_error(R"({"distill": {"windw": 3}})");
  expect_config_error(R"({"compression_ratio": 0})");
  expect_config_error(R"({"compression_ratio": 1.5})");
  expect_config_error(R"({"candidate": {"epochs": 0}})");
  expect_config_error(R"({"methods": ["diet", "magic"]})");
  expect_config_error(R"({"distill": {"window": 30}})");
  expect_config_error(R"({"distill": {"addressing": "psychic"}})");
  expect_config_error(R"({"seed": "one"})");
  expect_config_error("{not json");
  try {
    harness::parse_config(R"({"model": {"candidate_archs": ["transformer"]}})");
    FAIL("expected an unsupported-architecture error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kUnsupportedArchitecture);
  }
  CHECK_NOTHROW(harness::parse_config("{}"));
}

TEST_CASE("metrics csv schema") {
  std::vector<harness::MetricsRow> rows = {{"diet", "mlp", 0.7123456789, 0.51, 12.3456, false, ""},
                                           {"random", "cross", 0, 0, 0, true, "boom"}};
  const auto csv = harness::metrics_csv(rows);
  CHECK(csv ==
        "method,arch,auc,logloss,wall_s\n"
        "diet,mlp,0.712346,0.510000,12.346\n"
        "random,cross,failed,failed,failed\n");
  const auto back = harness::parse_metrics_csv(csv);
  REQUIRE(back.size() == 2);
  CHECK(back[0].auc == 0.712346);
  CHECK(back[1].failed);
  CHECK(harness::metrics_csv(back) == csv);
  CHECK_THROWS_AS(harness::parse_metrics_csv("a,b\n"), Error);
  CHECK_THROWS_AS(harness::parse_metrics_csv("method,arch,auc,logloss,wall_s\nx,y,1\n"), Error);
}

TEST_CASE("correlations") {
  const std::vector<double> x = {0.71, 0.73, 0.69, 0.75, 0.70};
  std::vector<double> neg;
  for (double v : x) neg.push_back(-v);
  CHECK(harness::pearson(x, x) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(harness::spearman(x, x) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(harness::pearson(x, neg) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(harness::spearman(x, neg) == doctest::Approx(-1.0).epsilon(1e-15));

  // Hand-set four points.
  const std::vector<double> a = {1.0, 2.0, 3.0, 4.0};
  const std::vector<double> b = {2.0, 1.0, 4.0, 3.0};
  CHECK(harness::pearson(a, b) == doctest::Approx(pearson_oracle(a, b)).epsilon(1e-14));
  CHECK(harness::pearson(a, b) == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(harness::spearman(a, b) == doctest::Approx(0.6).epsilon(1e-14));

  CHECK(harness::midranks(std::vector<double>{3.0, 1.0, 3.0, 2.0}) == std::vector<double>{3.5, 1.0, 3.5, 2.0});

  const std::vector<double> flat = {0.5, 0.5, 0.5, 0.5};
  try {
    harness::pearson(flat, a);
    FAIL("expected undefined metric");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kUndefinedMetric);
  }
  std::vector<harness::ConsistencyPoint> pts = {{0.7, 0.69, "a"}, {0.72, 0.70, "b"}};
  CHECK_THROWS_AS(harness::consistency_report(pts), Error);
  pts.push_back({0.74, 0.73, "c"});
  const auto r = harness::consistency_report(pts);
  CHECK(r.spearman == doctest::Approx(1.0));
  CHECK(r.csv.rfind("full_auc,reduced_auc,method\n", 0) == 0);
}

TEST_CASE("cost estimate") {
  const auto dlrm = harness::estimate_cost(1e11, 52e9, 0.0451, 1e14);
  CHECK(dlrm.total_flops == 5.2e21);
  const auto wukong = harness::estimate_cost(3.0e12, 442e9, 0.1851, 1e14);
  CHECK(wukong.total_flops == doctest::Approx(1.326e24).epsilon(1e-12));
  CHECK(std::round(wukong.total_flops / 1e23) / 10.0 == 1.3);

  const double p = harness::back_solve_peak(5.2e21, 0.0451, 9.7e4);
  CHECK(harness::estimate_cost(1e11, 52e9, 0.0451, p).gpu_hours == doctest::Approx(9.7e4).epsilon(1e-12));
  // The back-solved device peak is about 330 TFLOP/s; rounding it keeps the row within 5%.
  CHECK(p == doctest::Approx(3.3e14).epsilon(0.01));
  CHECK(std::abs(harness::estimate_cost(1e11, 52e9, 0.0451, 3.3e14).gpu_hours / 9.7e4 - 1.0) < 0.05);
  // The same peak reproduces the other two rows.
  CHECK(std::abs(harness::estimate_cost(3.0e12, 442e9, 0.1851, p).gpu_hours / 5.9e6 - 1.0) < 0.05);
  CHECK(std::abs(harness::estimate_cost(1.5e13, 2106e9, 0.4457, p).gpu_hours / 6.0e7 - 1.0) < 0.05);

  CHECK_THROWS_AS(harness::estimate_cost(0, 1, 1, 1), Error);
  CHECK_THROWS_AS(harness::estimate_cost(1, 1, -0.1, 1), Error);
}

TEST_CASE("efficiency csv") {
  std::vector<bilevel::StageResult> stages(2);
  stages[1].counters = {10.0, 20.0, 5.0, 88, 64};
  const auto csv = harness::efficiency_csv(stages);
  CHECK(csv ==
        "stage,addressing_flops,inner_flops,meta_flops,memory_bytes,tape_bytes\n"
        "1,0,0,0,0,0\n"
        "2,10,20,5,88,64\n");
}

TEST_CASE("ratio count and el2n band") {
  CHECK(harness::ratio_count(0.1, 100) == 10);
  CHECK(harness::ratio_count(0.02, 30000) == 600);
  CHECK(harness::ratio_count(0.1, 95) == 10);
  CHECK(harness::ratio_count(1.0, 7) == 7);
  CHECK_THROWS_AS(harness::ratio_count(0.0, 7), Error);
  CHECK(harness::el2n_band(100, 0.1) == std::pair<std::size_t, std::size_t>{85, 95});
  CHECK(harness::el2n_band(100, 1.0) == std::pair<std::size_t, std::size_t>{0, 100});
  CHECK(harness::el2n_band(10, 0.5) == std::pair<std::size_t, std::size_t>{5, 10});
}

TEST_CASE("random baseline") {
  Rng rng(1);
  std::vector<data::DataBlock> blocks = {block_of(50, rng), block_of(37, rng)};
  const auto all = harness::baseline_random(blocks, 1.0, 3);
  CHECK(all[0].size() == 50);
  CHECK(all[1].size() == 37);
  const auto a = harness::baseline_random(blocks, 0.2, 3);
  const auto b = harness::baseline_random(blocks, 0.2, 4);
  CHECK(a[0].size() == 10);
  CHECK(a[1].size() == 8);
  CHECK(b[0].size() == 10);
  CHECK(a != b);
  CHECK(a == harness::baseline_random(blocks, 0.2, 3));
  CHECK(std::is_sorted(a[0].begin(), a[0].end()));
}

TEST_CASE("el2n baseline picks the centred band") {
  Rng rng(2);
  std::vector<data::DataBlock> blocks = {block_of(100, rng)};
  auto c = model::init_checkpoint(small_spec(), 4);
  testing::randomize(c.dense, rng, 1.0);
  c.stage = 1;
  const std::vector<model::ModelCheckpoint> cps = {c};
  const auto sel = harness::baseline_el2n(blocks, cps, 0.1);
  const auto scores = boundary::el2n_scores(c, blocks[0].records);
  auto ranked = testing::sort_smallest(scores, 100);
  std::vector<std::size_t> expect(ranked.begin() + 85, ranked.begin() + 95);
  std::sort(expect.begin(), expect.end());
  CHECK(sel[0] == expect);
  CHECK(harness::baseline_el2n(blocks, cps, 1.0)[0].size() == 100);
}

TEST_CASE("kmeans") {
  Rng rng(3);
  Matrix pts = testing::random_matrix(40, 3, rng);
  // k = 1: the centroid is the mean, the pick is the point nearest to it.
  const auto one = harness::kmeans(pts, 1, 10, 5);
  std::vector<double> mean(3, 0.0);
  for (std::size_t i = 0; i < 40; ++i) {
    for (std::size_t j = 0; j < 3; ++j) mean[j] += pts(i, j) / 40.0;
  }
  for (std::size_t j = 0; j < 3; ++j) CHECK(one.centroids(0, j) == doctest::Approx(mean[j]).epsilon(1e-12));
  std::size_t best = 0;
  double best_d = 1e300;
  for (std::size_t i = 0; i < 40; ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < 3; ++j) d += (pts(i, j) - mean[j]) * (pts(i, j) - mean[j]);
    if (d < best_d) best_d = d, best = i;
  }
  CHECK(harness::nearest_to_centroids(pts, one.centroids) == std::vector<std::size_t>{best});

  // Objective never increases across Lloyd passes.
  const auto k4 = harness::kmeans(pts, 4, 25, 6);
  for (std::size_t i = 1; i < k4.objective.size(); ++i) CHECK(k4.objective[i] <= k4.objective[i - 1] + 1e-12);
  CHECK(harness::kmeans(pts, 4, 25, 6).assign == k4.assign);

  // k = n: every point is picked.
  const auto all = harness::kmeans(pts, 40, 5, 7);
  auto picks = harness::nearest_to_centroids(pts, all.centroids);
  std::sort(picks.begin(), picks.end());
  std::vector<std::size_t> every(40);
  std::iota(every.begin(), every.end(), std::size_t{0});
  CHECK(picks == every);
}

TEST_CASE("kmeans baseline sizes match the ratio") {
  Rng rng(4);
  std::vector<data::DataBlock> blocks = {block_of(120, rng), block_of(80, rng)};
  auto c1 = model::init_checkpoint(small_spec(), 1);
  auto c2 = model::init_checkpoint(small_spec(), 2);
  c1.stage = 1;
  c2.stage = 2;
  const std::vector<model::ModelCheckpoint> cps = {c1, c2};
  const auto sel = harness::baseline_kmeans(blocks, cps, 0.05, 10, 9);
  CHECK(sel[0].size() == 6);
  CHECK(sel[1].size() == 4);
  const auto mem = harness::selection_to_memory(blocks, cps, sel);
  CHECK(mem[0].size() == 6);
  CHECK(mem[1].stage == 2);
  CHECK(mem[0].samples[0].embedding == model::embed(c1, blocks[0].records[sel[0][0]]));
}

TEST_CASE("warmup candidate with zero learning rates ignores the data") {
  Rng rng(5);
  const auto spec = small_spec();
  auto phi = model::init_checkpoint(spec, 3);
  phi.stage = 2;
  const auto sub = block_of(60, rng);
  const auto val = block_of(40, rng);
  harness::CandidateConfig cc;
  cc.epochs = 1;
  cc.distill_lr = 0.0;
  cc.lr = 0.0;
  const std::vector<std::size_t> idx = {0, 1, 2, 3};
  const std::vector<boundary::SyntheticMemory> d1 = {boundary::to_synthetic(sub.records, idx, phi)};
  const std::vector<boundary::SyntheticMemory> d2 = {boundary::to_synthetic(val.records, idx, phi)};
  const auto a = harness::warmup_train_candidate(spec, d1, phi, sub, val, cc, 11);
  const auto b = harness::warmup_train_candidate(spec, d2, phi, sub, val, cc, 11);
  CHECK(a.ckpt.dense == b.ckpt.dense);
  CHECK(a.ckpt.tables == phi.tables);
  CHECK(a.best_epoch == 1);
}

TEST_CASE("single-method experiment and shared splits") {
  auto cfg = reduced();
  cfg.methods = {"full_data"};
  cfg.candidate_archs = {model::Arch::kMlp};
  const auto r = harness::run_experiment(cfg);
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].method == "full_data");
  CHECK_FALSE(r.rows[0].failed);
  CHECK(r.rows[0].auc > 0.0);

  cfg.methods = {"cold_start", "random"};
  const auto r2 = harness::run_experiment(cfg);
  CHECK(r2.rows.size() == 2);
  CHECK(r2.train_hash == r.train_hash);
  CHECK(r2.validation_hash == r.validation_hash);
  CHECK(r2.test_hash == r.test_hash);
}

TEST_CASE("baseline sizes match the distilled budget") {
  auto cfg = reduced();
  cfg.methods = {"diet", "random", "el2n", "kmeans"};
  cfg.candidate_archs = {model::Arch::kMlp};
  cfg.distill.outer_iterations = 2;
  const auto r = harness::run_experiment(cfg);
  const auto diet = static_cast<double>(r.selected_counts.at("diet"));
  for (const char* m : {"random", "el2n", "kmeans"}) {
    CHECK(std::abs(static_cast<double>(r.selected_counts.at(m)) - diet) <= 3.0);
  }
}

TEST_CASE("cli reports errors as json") {
  const fs::path dir = fs::temp_directory_path() / "sdist_cli_err";
  fs::create_directories(dir);
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string(SDIST_CLI) + " run --config " + (dir / "missing.json").string() + " --out " +
                          dir.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  CHECK(status != 0);
  const auto j = nlohmann::json::parse(read_file(err));
  CHECK(j["error"]["kind"].is_string());
  CHECK(j["error"]["message"].is_string());

  const std::string cost = std::string(SDIST_CLI) + " estimate-cost --samples 1e11 --flops 52e9 --mfu 0.0451 " +
                           "--peak 3.3e14 > " + (dir / "cost.txt").string();
  CHECK(std::system(cost.c_str()) == 0);
  const auto c = nlohmann::json::parse(read_file(dir / "cost.txt"));
  CHECK(c["total_flops"].get<double>() == 5.2e21);
}
