// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#include "sdist/recmodel/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sdist/common/error.hpp"

namespace sdist::model {

double multitask_bce(const PredictionBatch& b) {
  require(b.logits.same_shape(b.targets), ErrorKind::kContract, "multitask_bce: shape mismatch");
  if (b.logits.rows == 0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < b.logits.size(); ++i) {
    const double z = b.logits.data[i];
    s += ad::stable_softplus(z) - b.targets.data[i] * z;
  }
  return s / static_cast<double>(b.logits.rows);
}

ad::Var multitask_bce(const ad::Var& logits, const ad::Var& targets) { return ad::bce_with_logits(logits, targets); }

double auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  require(scores.size() == labels.size(), ErrorKind::kContract, "auc: length mismatch");
  std::size_t pos = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    require(std::isfinite(scores[i]), ErrorKind::kNumerical, "auc: non-finite score");
    pos += labels[i] != 0;
  }
  const std::size_t neg = scores.size() - pos;
  if (pos == 0 || neg == 0) fail(ErrorKind::kUndefinedMetric, "auc: need both positive and negative labels");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of midranks (1-based) of the positives.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::size_t pos_in_tie = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) pos_in_tie += labels[order[j++]] != 0;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    rank_sum += midrank * static_cast<double>(pos_in_tie);
    i = j;
  }
  const double p = static_cast<double>(pos);
  return (rank_sum - 0.5 * p * (p + 1.0)) / (p * static_cast<double>(neg));
}

MultiTaskAuc auc_multitask(const Matrix& scores, const Matrix& labels) {
  require(scores.same_shape(labels), ErrorKind::kContract, "auc_multitask: shape mismatch");
  MultiTaskAuc out;
  const std::size_t n = scores.rows;
  std::vector<double> s(n);
  std::vector<std::uint8_t> y(n);
  double total = 0.0;
  std::size_t valid = 0;
  for (std::size_t k = 0; k < scores.cols; ++k) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = scores(i, k);
      y[i] = labels(i, k) > 0.5 ? 1 : 0;
      pos += y[i];
    }
    if (pos == 0 || pos == n) {
      out.per_task.push_back(std::numeric_limits<double>::quiet_NaN());
      out.skipped.push_back(true);
      continue;
    }
    const double a = auc(s, y);
    out.per_task.push_back(a);
    out.skipped.push_back(false);
    total += a;
    ++valid;
  }
  if (valid == 0) fail(ErrorKind::kUndefinedMetric, "auc: every task is degenerate");
  out.mean = total / static_cast<double>(valid);
  return out;
}

double logloss(const Matrix& probabilities, const Matrix& labels) {
  require(probabilities.same_shape(labels), ErrorKind::kContract, "logloss: shape mismatch");
  if (probabilities.size() == 0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const double p = std::clamp(probabilities.data[i], kLoglossClamp, 1.0 - kLoglossClamp);
    const double y = labels.data[i];
    s -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  return s / static_cast<double>(probabilities.size());
}

Matrix sigmoid(const Matrix& logits) {
  Matrix p = logits;
  for (auto& x : p.data) x = ad::stable_sigmoid(x);
  return p;
}

}  // namespace sdist::model
