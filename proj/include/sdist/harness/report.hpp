// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sdist/bilevel/distill.hpp"

namespace sdist::harness {

struct MetricsRow {
  std::string method;
  std::string arch;
  double auc = 0.0;
  double logloss = 0.0;
  double wall_s = 0.0;
  bool failed = false;
  std::string error;
};

/// `method,arch,auc,logloss,wall_s`; failed cells carry "failed" in the
/// metric columns.
std::string metrics_csv(std::span<const MetricsRow> rows);
std::vector<MetricsRow> parse_metrics_csv(const std::string& text);

struct ConsistencyPoint {
  double full_auc = 0.0;     // x
  double reduced_auc = 0.0;  // y
  std::string tag;
};

double pearson(std::span<const double> x, std::span<const double> y);
/// Pearson correlation of midranks.
double spearman(std::span<const double> x, std::span<const double> y);
std::vector<double> midranks(std::span<const double> v);

struct ConsistencyReport {
  double pearson = 0.0;
  double spearman = 0.0;
  std::string csv;  // full_auc,reduced_auc,method
};

/// Undefined-metric error for fewer than 3 points or zero variance.
ConsistencyReport consistency_report(std::span<const ConsistencyPoint> points);

struct CostEstimate {
  double total_flops = 0.0;  // C = D * F
  double gpu_hours = 0.0;    // C / (eta * P * 3600)
};

CostEstimate estimate_cost(double samples, double flops_per_sample, double mfu, double peak_flops);
/// P such that estimate_cost(...).gpu_hours equals `gpu_hours`.
double back_solve_peak(double total_flops, double mfu, double gpu_hours);

/// stage,addressing_flops,inner_flops,meta_flops,memory_bytes,tape_bytes
std::string efficiency_csv(std::span<const bilevel::StageResult> stages);

}  // namespace sdist::harness
