// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#include "sdist/diffgrad/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "sdist/common/error.hpp"
#include "sdist/simd/kernels.hpp"

namespace sdist::ad {
namespace {

thread_local bool t_grad_enabled = true;

std::string shape_str(const Matrix& m) { return std::to_string(m.rows) + "x" + std::to_string(m.cols); }

void check(bool ok, const char* op, const Matrix& a, const Matrix& b) {
  if (!ok) fail(ErrorKind::kContract, std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

Var make(const char* op, Matrix value, std::vector<Var> inputs,
         std::function<std::vector<Var>(const Var&)> backward) {
  bool needs = false;
  if (t_grad_enabled) {
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  }
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = op;
  if (needs) {
    n->requires_grad = true;
    n->inputs = std::move(inputs);
    n->backward = std::move(backward);
  }
  return Var::from_node(std::move(n));
}

Matrix zeros_like(const Matrix& m) { return Matrix(m.rows, m.cols); }

template <class F>
Matrix map(const Matrix& a, F f) {
  Matrix out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = f(a.data[i]);
  return out;
}

template <class F>
Matrix zip(const Matrix& a, const Matrix& b, F f) {
  Matrix out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = f(a.data[i], b.data[i]);
  return out;
}

}  // namespace

Var::Var(Matrix value, bool requires_grad) {
  node_ = std::make_shared<Node>();
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Var Var::scalar(double v, bool requires_grad) { return Var(Matrix(1, 1, v), requires_grad); }

double Var::item() const {
  require(node_ && node_->value.size() == 1, ErrorKind::kContract, "item(): not a 1x1 value");
  return node_->value.data[0];
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = prev_; }
GradModeGuard::GradModeGuard(bool enabled) : prev_(t_grad_enabled) { t_grad_enabled = enabled; }
GradModeGuard::~GradModeGuard() { t_grad_enabled = prev_; }

Var detach(const Var& v) { return Var(v.value(), false); }

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double stable_softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

Var matmul(const Var& a, const Var& b) {
  check(a.cols() == b.rows(), "matmul", a.value(), b.value());
  Matrix out(a.rows(), b.cols());
  simd::kernels().gemm_nn(a.rows(), b.cols(), a.cols(), a.value().data.data(), b.value().data.data(),
                          out.data.data());
  return make("matmul", std::move(out), {a, b}, [a, b](const Var& g) {
    std::vector<Var> r(2);
    if (a.requires_grad()) r[0] = matmul_nt(g, b);
    if (b.requires_grad()) r[1] = matmul_tn(a, g);
    return r;
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  check(a.cols() == b.cols(), "matmul_nt", a.value(), b.value());
  Matrix out(a.rows(), b.rows());
  simd::kernels().gemm_nt(a.rows(), b.rows(), a.cols(), a.value().data.data(), b.value().data.data(),
                          out.data.data());
  return make("matmul_nt", std::move(out), {a, b}, [a, b](const Var& g) {
    std::vector<Var> r(2);
    if (a.requires_grad()) r[0] = matmul(g, b);
    if (b.requires_grad()) r[1] = matmul_tn(g, a);
    return r;
  });
}

Var matmul_tn(const Var& a, const Var& b) {
  check(a.rows() == b.rows(), "matmul_tn", a.value(), b.value());
  Matrix out(a.cols(), b.cols());
  simd::kernels().gemm_tn(a.cols(), b.cols(), a.rows(), a.value().data.data(), b.value().data.data(),
                          out.data.data());
  return make("matmul_tn", std::move(out), {a, b}, [a, b](const Var& g) {
    std::vector<Var> r(2);
    if (a.requires_grad()) r[0] = matmul_nt(b, g);
    if (b.requires_grad()) r[1] = matmul(a, g);
    return r;
  });
}

Var add(const Var& a, const Var& b) {
  check(a.value().same_shape(b.value()), "add", a.value(), b.value());
  return make("add", zip(a.value(), b.value(), [](double x, double y) { return x + y; }), {a, b},
              [](const Var& g) { return std::vector<Var>{g, g}; });
}

Var sub(const Var& a, const Var& b) {
  check(a.value().same_shape(b.value()), "sub", a.value(), b.value());
  return make("sub", zip(a.value(), b.value(), [](double x, double y) { return x - y; }), {a, b},
              [b](const Var& g) {
                std::vector<Var> r{g, Var()};
                if (b.requires_grad()) r[1] = scale(g, -1.0);
                return r;
              });
}

Var mul(const Var& a, const Var& b) {
  check(a.value().same_shape(b.value()), "mul", a.value(), b.value());
  return make("mul", zip(a.value(), b.value(), [](double x, double y) { return x * y; }), {a, b},
              [a, b](const Var& g) {
                std::vector<Var> r(2);
                if (a.requires_grad()) r[0] = mul(g, b);
                if (b.requires_grad()) r[1] = mul(g, a);
                return r;
              });
}

Var scale(const Var& a, double c) {
  return make("scale", map(a.value(), [c](double x) { return c * x; }), {a},
              [c](const Var& g) { return std::vector<Var>{scale(g, c)}; });
}

Var add_row(const Var& x, const Var& row) {
  check(row.rows() == 1 && row.cols() == x.cols(), "add_row", x.value(), row.value());
  Matrix out = x.value();
  const auto& r = row.value().data;
  for (std::size_t i = 0; i < out.rows; ++i) {
    for (std::size_t j = 0; j < out.cols; ++j) out.data[i * out.cols + j] += r[j];
  }
  return make("add_row", std::move(out), {x, row}, [row](const Var& g) {
    std::vector<Var> r{g, Var()};
    if (row.requires_grad()) r[1] = sum_rows(g);
    return r;
  });
}

Var sum_rows(const Var& x) {
  const Matrix& v = x.value();
  Matrix out(1, v.cols);
  for (std::size_t i = 0; i < v.rows; ++i) {
    for (std::size_t j = 0; j < v.cols; ++j) out.data[j] += v.data[i * v.cols + j];
  }
  const std::size_t n = v.rows;
  return make("sum_rows", std::move(out), {x}, [n](const Var& g) { return std::vector<Var>{broadcast_rows(g, n)}; });
}

Var broadcast_rows(const Var& row, std::size_t n) {
  require(row.rows() == 1, ErrorKind::kContract, "broadcast_rows: expects a 1 x c row");
  Matrix out(n, row.cols());
  for (std::size_t i = 0; i < n; ++i) std::copy(row.value().data.begin(), row.value().data.end(), out.row_span(i).begin());
  return make("broadcast_rows", std::move(out), {row}, [](const Var& g) { return std::vector<Var>{sum_rows(g)}; });
}

Var mul_col(const Var& x, const Var& col) {
  check(col.cols() == 1 && col.rows() == x.rows(), "mul_col", x.value(), col.value());
  Matrix out = x.value();
  for (std::size_t i = 0; i < out.rows; ++i) {
    const double s = col.value().data[i];
    for (auto& v : out.row_span(i)) v *= s;
  }
  return make("mul_col", std::move(out), {x, col}, [x, col](const Var& g) {
    std::vector<Var> r(2);
    if (x.requires_grad()) r[0] = mul_col(g, col);
    if (col.requires_grad()) r[1] = sum_cols(mul(g, x));
    return r;
  });
}

Var sum_cols(const Var& x) {
  const Matrix& v = x.value();
  Matrix out(v.rows, 1);
  for (std::size_t i = 0; i < v.rows; ++i) {
    double s = 0.0;
    for (double e : v.row_span(i)) s += e;
    out.data[i] = s;
  }
  const std::size_t c = v.cols;
  return make("sum_cols", std::move(out), {x}, [c](const Var& g) { return std::vector<Var>{broadcast_cols(g, c)}; });
}

Var broadcast_cols(const Var& col, std::size_t c) {
  require(col.cols() == 1, ErrorKind::kContract, "broadcast_cols: expects an n x 1 column");
  Matrix out(col.rows(), c);
  for (std::size_t i = 0; i < out.rows; ++i) {
    for (auto& e : out.row_span(i)) e = col.value().data[i];
  }
  return make("broadcast_cols", std::move(out), {col}, [](const Var& g) { return std::vector<Var>{sum_cols(g)}; });
}

Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().data) s += v;
  const std::size_t r = x.rows(), c = x.cols();
  return make("sum", Matrix(1, 1, s), {x}, [r, c](const Var& g) { return std::vector<Var>{fill(g, r, c)}; });
}

Var fill(const Var& s, std::size_t rows, std::size_t cols) {
  require(s.value().size() == 1, ErrorKind::kContract, "fill: expects a 1 x 1 value");
  return make("fill", Matrix(rows, cols, s.value().data[0]), {s}, [](const Var& g) { return std::vector<Var>{sum(g)}; });
}

Var relu(const Var& x) {
  const Matrix& v = x.value();
  Matrix out = map(v, [](double e) { return e > 0.0 ? e : 0.0; });
  return make("relu", std::move(out), {x}, [x](const Var& g) {
    // The mask is piecewise constant, so it carries no further derivative.
    Var mask(map(x.value(), [](double e) { return e > 0.0 ? 1.0 : 0.0; }));
    return std::vector<Var>{mul(g, mask)};
  });
}

Var sigmoid(const Var& x) {
  return make("sigmoid", map(x.value(), stable_sigmoid), {x}, [x](const Var& g) {
    Var s = sigmoid(x);
    return std::vector<Var>{mul(g, sub(s, mul(s, s)))};
  });
}

Var softplus(const Var& x) {
  return make("softplus", map(x.value(), stable_softplus), {x},
              [x](const Var& g) { return std::vector<Var>{mul(g, sigmoid(x))}; });
}

Var embedding_lookup(std::span<const Var> tables, std::span<const std::size_t> ids, std::size_t n_rows) {
  const std::size_t nf = tables.size();
  require(nf > 0 && ids.size() == n_rows * nf, ErrorKind::kContract, "embedding_lookup: id count mismatch");
  const std::size_t d = tables[0].cols();
  for (const auto& t : tables) require(t.cols() == d, ErrorKind::kContract, "embedding_lookup: ragged tables");
  Matrix out(n_rows, nf * d);
  for (std::size_t i = 0; i < n_rows; ++i) {
    for (std::size_t f = 0; f < nf; ++f) {
      const std::size_t id = ids[i * nf + f];
      require(id < tables[f].rows(), ErrorKind::kContract, "embedding_lookup: id out of vocabulary");
      const double* src = tables[f].value().data.data() + id * d;
      std::copy(src, src + d, out.data.data() + i * nf * d + f * d);
    }
  }
  std::vector<Var> ins(tables.begin(), tables.end());
  std::vector<std::size_t> id_copy(ids.begin(), ids.end());
  return make("embedding_lookup", std::move(out), ins, [ins, id_copy, n_rows, d](const Var& g) {
    const std::size_t nf2 = ins.size();
    std::vector<Var> r(nf2);
    for (std::size_t f = 0; f < nf2; ++f) {
      if (!ins[f].requires_grad()) continue;
      Matrix gt(ins[f].rows(), d);
      for (std::size_t i = 0; i < n_rows; ++i) {
        const double* src = g.value().data.data() + i * nf2 * d + f * d;
        double* dst = gt.data.data() + id_copy[i * nf2 + f] * d;
        for (std::size_t k = 0; k < d; ++k) dst[k] += src[k];
      }
      r[f] = Var(std::move(gt));
    }
    return r;
  });
}

Var bce_with_logits(const Var& logits, const Var& targets) {
  check(logits.value().same_shape(targets.value()), "bce_with_logits", logits.value(), targets.value());
  const double inv_n = logits.rows() == 0 ? 0.0 : 1.0 / static_cast<double>(logits.rows());
  return scale(sum(sub(softplus(logits), mul(targets, logits))), inv_n);
}

std::vector<Var> grad(const Var& output, std::span<const Var> inputs, bool create_graph) {
  require(output.defined() && output.value().size() == 1, ErrorKind::kContract, "grad: output must be a scalar");
  std::vector<Var> result(inputs.size());
  auto zero_results = [&] {
    for (std::size_t i = 0; i < inputs.size(); ++i) result[i] = Var(zeros_like(inputs[i].value()));
  };
  if (!output.requires_grad()) {
    zero_results();
    return result;
  }

  // Iterative post-order DFS gives a topological order (inputs before users).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{output.node(), 0}};
  visited.insert(output.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].node();
      if (child != nullptr && child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  GradModeGuard mode(create_graph);
  std::unordered_map<Node*, Var> grads;
  grads.emplace(output.node(), Var(Matrix(1, 1, 1.0)));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    auto git = grads.find(node);
    if (git == grads.end() || !node->backward) continue;
    const Var g = git->second;
    std::vector<Var> in_grads = node->backward(g);
    for (std::size_t i = 0; i < node->inputs.size(); ++i) {
      const Var& in = node->inputs[i];
      if (!in.requires_grad() || !in_grads[i].defined()) continue;
      auto [slot, inserted] = grads.try_emplace(in.node(), in_grads[i]);
      if (!inserted) slot->second = add(slot->second, in_grads[i]);
    }
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto it = grads.find(inputs[i].node());
    result[i] = it == grads.end() ? Var(zeros_like(inputs[i].value())) : it->second;
  }
  return result;
}

}  // namespace sdist::ad
