// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sdist/diffgrad/matrix.hpp"

// Reverse-mode differentiation over dense matrices.
//
// Every op's backward rule is itself written with differentiable ops, so
// calling grad() with create_graph=true yields gradients that can be
// differentiated again. That is what the unrolled inner loop relies on:
// the inner SGD step is a graph, and the meta-gradient is a second reverse
// sweep over it (reverse-over-reverse Hessian-vector products).

namespace sdist::ad {

class Var;

struct Node {
  Matrix value;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<Var> inputs;
  /// Maps the gradient w.r.t. this node to gradients w.r.t. `inputs`.
  /// Entries may be undefined Vars for inputs that need no gradient.
  std::function<std::vector<Var>(const Var&)> backward;
};

class Var {
 public:
  Var() = default;
  /// Leaf variable.
  explicit Var(Matrix value, bool requires_grad = false);

  static Var scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  std::size_t rows() const { return node_->value.rows; }
  std::size_t cols() const { return node_->value.cols; }
  double item() const;
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const char* op() const { return node_->op; }
  Node* node() const { return node_.get(); }

  static Var from_node(std::shared_ptr<Node> n) {
    Var v;
    v.node_ = std::move(n);
    return v;
  }

 private:
  std::shared_ptr<Node> node_;
};

/// Graph recording is on by default; NoGradGuard turns it off in a scope.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

class GradModeGuard {
 public:
  explicit GradModeGuard(bool enabled);
  ~GradModeGuard();
  GradModeGuard(const GradModeGuard&) = delete;
  GradModeGuard& operator=(const GradModeGuard&) = delete;

 private:
  bool prev_;
};

/// Gradients of scalar `output` w.r.t. each of `inputs`. Inputs that the
/// output does not depend on get zero matrices. With create_graph the
/// returned Vars are themselves differentiable.
std::vector<Var> grad(const Var& output, std::span<const Var> inputs, bool create_graph = false);

/// Constant copy with no history.
Var detach(const Var& v);

// Primitive ops. Shapes are checked; mismatches are contract errors.
Var matmul(const Var& a, const Var& b);     // A B
Var matmul_nt(const Var& a, const Var& b);  // A B^T
Var matmul_tn(const Var& a, const Var& b);  // A^T B
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // elementwise
Var scale(const Var& a, double c);
Var add_row(const Var& x, const Var& row);     // x (n x c) + row (1 x c) broadcast
Var sum_rows(const Var& x);                    // (n x c) -> (1 x c)
Var broadcast_rows(const Var& row, std::size_t n);
Var mul_col(const Var& x, const Var& col);     // x (n x c) * col (n x 1) broadcast
Var sum_cols(const Var& x);                    // (n x c) -> (n x 1)
Var broadcast_cols(const Var& col, std::size_t c);
Var sum(const Var& x);                         // -> 1 x 1
Var fill(const Var& s, std::size_t rows, std::size_t cols);  // 1 x 1 -> rows x cols
Var relu(const Var& x);
Var sigmoid(const Var& x);
Var softplus(const Var& x);

/// Row gather over several embedding tables: output row i is the
/// concatenation of tables[f].row(ids[i * tables.size() + f]). Backward is
/// a scatter-add; second-order differentiation through it is not supported
/// (embedding tables never sit inside an unrolled inner loop).
Var embedding_lookup(std::span<const Var> tables, std::span<const std::size_t> ids, std::size_t n_rows);

/// mean over rows of sum over columns of BCE(sigmoid(logits), targets), in
/// the stable form softplus(z) - t z. `targets` may be soft.
Var bce_with_logits(const Var& logits, const Var& targets);

// Plain-value helpers (no graph).
double stable_sigmoid(double z);
double stable_softplus(double z);

}  // namespace sdist::ad
