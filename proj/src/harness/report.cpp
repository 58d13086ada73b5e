// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#include "sdist/harness/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "sdist/common/error.hpp"

namespace sdist::harness {
namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string metrics_csv(std::span<const MetricsRow> rows) {
  std::string out = "method,arch,auc,logloss,wall_s\n";
  for (const auto& r : rows) {
    out += r.method + "," + r.arch + ",";
    if (r.failed) {
      out += "failed,failed,failed\n";
    } else {
      out += fixed(r.auc, 6) + "," + fixed(r.logloss, 6) + "," + fixed(r.wall_s, 3) + "\n";
    }
  }
  return out;
}

std::vector<MetricsRow> parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<MetricsRow> rows;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1) {
      require(line == "method,arch,auc,logloss,wall_s", ErrorKind::kParse, "metrics csv: bad header");
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    require(cells.size() == 5, ErrorKind::kParse, "metrics csv line " + std::to_string(lineno) + ": expected 5 columns");
    MetricsRow r;
    r.method = cells[0];
    r.arch = cells[1];
    if (cells[2] == "failed") {
      r.failed = true;
    } else {
      try {
        r.auc = std::stod(cells[2]);
        r.logloss = std::stod(cells[3]);
        r.wall_s = std::stod(cells[4]);
      } catch (const std::exception&) {
        fail(ErrorKind::kParse, "metrics csv line " + std::to_string(lineno) + ": bad number");
      }
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, ErrorKind::kContract, "pearson: need two equal-length series");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) fail(ErrorKind::kUndefinedMetric, "correlation undefined for zero variance");
  return sxy / std::sqrt(sxx * syy);
}

std::vector<double> midranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && v[order[j]] == v[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) r[order[k]] = mid;
    i = j;
  }
  return r;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  const auto rx = midranks(x);
  const auto ry = midranks(y);
  return pearson(rx, ry);
}

ConsistencyReport consistency_report(std::span<const ConsistencyPoint> points) {
  if (points.size() < 3) fail(ErrorKind::kUndefinedMetric, "consistency needs at least 3 points");
  std::vector<double> x, y;
  ConsistencyReport r;
  r.csv = "full_auc,reduced_auc,method\n";
  for (const auto& p : points) {
    x.push_back(p.full_auc);
    y.push_back(p.reduced_auc);
    r.csv += num(p.full_auc) + "," + num(p.reduced_auc) + "," + p.tag + "\n";
  }
  r.pearson = pearson(x, y);
  r.spearman = spearman(x, y);
  return r;
}

CostEstimate estimate_cost(double samples, double flops_per_sample, double mfu, double peak_flops) {
  require(samples > 0 && flops_per_sample > 0 && mfu > 0 && peak_flops > 0, ErrorKind::kContract,
          "estimate_cost: all inputs must be positive");
  CostEstimate c;
  c.total_flops = samples * flops_per_sample;
  c.gpu_hours = c.total_flops / (mfu * peak_flops * 3600.0);
  return c;
}

double back_solve_peak(double total_flops, double mfu, double gpu_hours) {
  require(total_flops > 0 && mfu > 0 && gpu_hours > 0, ErrorKind::kContract, "back_solve_peak: inputs must be positive");
  return total_flops / (mfu * gpu_hours * 3600.0);
}

std::string efficiency_csv(std::span<const bilevel::StageResult> stages) {
  std::string out = "stage,addressing_flops,inner_flops,meta_flops,memory_bytes,tape_bytes\n";
  for (std::size_t t = 0; t < stages.size(); ++t) {
    const auto& c = stages[t].counters;
    out += std::to_string(t + 1) + "," + num(c.addressing_flops) + "," + num(c.inner_flops) + "," +
           num(c.meta_flops) + "," + std::to_string(c.memory_bytes) + "," + std::to_string(c.tape_bytes) + "\n";
  }
  return out;
}

}  // namespace sdist::harness
