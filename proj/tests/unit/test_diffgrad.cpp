// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "sdist/common/error.hpp"
#include "sdist/diffgrad/autograd.hpp"
#include "sdist/diffgrad/engine.hpp"
#include "sdist/recmodel/model.hpp"

using namespace sdist;
using ad::Var;
using testing::fd_gradient;
using testing::max_rel_err;

namespace {

using OpFn = std::function<Var(const std::vector<Var>&)>;

// Weighted sum of an op's output so every output entry matters.
double weighted(const OpFn& op, const std::vector<Matrix>& in, const Matrix& weights) {
  ad::NoGradGuard g;
  std::vector<Var> v;
  for (const auto& m : in) v.emplace_back(m, false);
  const Var out = op(v);
  double s = 0.0;
  for (std::size_t i = 0; i < out.value().size(); ++i) s += out.value().data[i] * weights.data[i];
  return s;
}

// Reverse-mode gradient of every input against central differences.
double op_grad_error(const OpFn& op, const std::vector<Matrix>& in, Rng& rng, double h = 1e-6) {
  std::vector<Var> v;
  for (const auto& m : in) v.emplace_back(m, true);
  const Var out = op(v);
  const Matrix weights = testing::random_matrix(out.rows(), out.cols(), rng);
  const Var loss = ad::sum(ad::mul(out, Var(weights)));
  const auto g = ad::grad(loss, v);
  double worst = 0.0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    auto f = [&](const std::vector<double>& x) {
      std::vector<Matrix> copy = in;
      copy[i].data = x;
      return weighted(op, copy, weights);
    };
    const auto fd = fd_gradient(f, in[i].data, h);
    worst = std::max(worst, max_rel_err(g[i].value().data, fd, 1e-6));
  }
  return worst;
}

// Second order: d/dx of <grad_x f(x), R> against differences of the first
// derivative. Exercises every backward closure under create_graph.
double op_second_order_error(const OpFn& op, const std::vector<Matrix>& in, Rng& rng) {
  const Matrix w_out = [&] {
    std::vector<Var> v;
    for (const auto& m : in) v.emplace_back(m, false);
    const Var o = op(v);
    return testing::random_matrix(o.rows(), o.cols(), rng);
  }();
  std::vector<Matrix> w_in;
  for (const auto& m : in) w_in.push_back(testing::random_matrix(m.rows, m.cols, rng));

  auto first = [&](const std::vector<Var>& v, bool create) {
    const Var loss = ad::sum(ad::mul(op(v), Var(w_out)));
    const auto g = ad::grad(loss, v, create);
    Var s = Var::scalar(0.0);
    for (std::size_t i = 0; i < g.size(); ++i) s = ad::add(s, ad::sum(ad::mul(g[i], Var(w_in[i]))));
    return s;
  };
  std::vector<Var> v;
  for (const auto& m : in) v.emplace_back(m, true);
  const Var s = first(v, true);
  const auto g2 = ad::grad(s, v);
  double worst = 0.0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    auto f = [&](const std::vector<double>& x) {
      std::vector<Var> vv;
      for (std::size_t j = 0; j < in.size(); ++j) {
        Matrix m = in[j];
        if (j == i) m.data = x;
        vv.emplace_back(m, true);
      }
      return first(vv, false).item();
    };
    const auto fd = fd_gradient(f, in[i].data, 1e-5);
    worst = std::max(worst, max_rel_err(g2[i].value().data, fd, 1e-5));
  }
  return worst;
}

// Inputs kept away from relu's kink so differences stay one-sided-free.
Matrix away_from_zero(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m = testing::random_matrix(r, c, rng);
  for (auto& v : m.data) v = v >= 0 ? v + 0.1 : v - 0.1;
  return m;
}

model::DenseNet small_net(std::size_t in, std::vector<std::size_t> hidden, std::size_t k,
                          model::Arch arch = model::Arch::kMlp) {
  return model::DenseNet(arch, in, std::move(hidden), k);
}

diffgrad::InnerLoss soft_bce(const model::DenseNet& net) {
  return [&net](std::span<const Var> p, const Var& x, const Var& y) {
    const Var logits = net.forward(p, x).logits;
    return ad::bce_with_logits(logits, ad::sigmoid(y));
  };
}

std::vector<diffgrad::InnerBatch> random_batches(std::size_t m, std::size_t rows, std::size_t d, std::size_t k,
                                                 Rng& rng) {
  std::vector<diffgrad::InnerBatch> out;
  for (std::size_t i = 0; i < m; ++i) {
    out.push_back({testing::random_matrix(rows, d, rng), testing::random_matrix(rows, k, rng, 2.0), i});
  }
  return out;
}

}  // namespace

TEST_CASE("primitive ops: reverse mode matches central differences") {
  Rng rng(101);
  const double tol = 1e-6;
  const Matrix a = testing::random_matrix(3, 4, rng), b = testing::random_matrix(4, 5, rng);
  const Matrix c = testing::random_matrix(3, 4, rng), bt = testing::random_matrix(5, 4, rng);
  const Matrix at = testing::random_matrix(4, 3, rng), row = testing::random_matrix(1, 4, rng);
  const Matrix col = testing::random_matrix(3, 1, rng), s = testing::random_matrix(1, 1, rng);

  CHECK(op_grad_error([](auto& v) { return ad::matmul(v[0], v[1]); }, {a, b}, rng) < tol);
  CHECK(op_grad_error([](auto& v) { return ad::matmul_nt(v[0], v[1]); }, {a, bt}, rng) < tol);
  CHECK(op_grad_error([](auto& v) { return ad::matmul_tn(v[0], v[1]); }, {at, testing::random_matrix(4, 5, rng)}, rng) < tol);
  CHECK(op_grad_error([](auto& v) { return ad::add(v[0], v[1]); }, {a, c}, rng) < tol);
  CHECK(op_grad_error([](auto& v) { return ad::sub(v[0], v[1]); }, {a, c}, rng) < tol);
  CHECK(op_grad_error([](auto& v) { return ad::mul(v[0], v[1]); }, {a, c}, rng) < tol);
  CHECK(op_grad_error([](auto& v) { return ad::scale(v[0], -1.7); }, {a}, rng) < tol);
  CHECK(op_grad_error([](auto& v) { return ad::add_row(v[0], v[1]); }, {a, row}, rng) < tol);
  CHECK(op_grad_error([](auto& v) { return ad::sum_rows(v[0]); }, {a}, rng) < tol);
  CHECK(op_grad_error([](auto& v) { return ad::broadcast_rows(v[0], 3); }, {row}, rng) < tol);
  CHECK(op_grad_error([](auto& v) { return ad::mul_col(v[0], v[1]); }, {a, col}, rng) < tol);
  CHECK(op_grad_error([](auto& v) { return ad::sum_cols(v[0]); }, {a}, rng) < tol);
  CHECK(op_grad_error([](auto& v) { return ad::broadcast_cols(v[0], 4); }, {col}, rng) < tol);
  CHECK(op_grad_error([](auto& v) { return ad::sum(v[0]); }, {a}, rng) < tol);
  CHECK(op_grad_error([](auto& v) { return ad::fill(v[0], 2, 3); }, {s}, rng) < tol);
  CHECK(op_grad_error([](auto& v) { return ad::relu(v[0]); }, {away_from_zero(3, 4, rng)}, rng) < tol);
  CHECK(op_grad_error([](auto& v) { return ad::sigmoid(v[0]); }, {a}, rng) < tol);
  CHECK(op_grad_error([](auto& v) { return ad::softplus(v[0]); }, {a}, rng) < tol);
  Matrix probs = testing::random_matrix(3, 4, rng);
  for (auto& p : probs.data) p = ad::stable_sigmoid(p);
  CHECK(op_grad_error([](auto& v) { return ad::bce_with_logits(v[0], v[1]); }, {a, probs}, rng) < tol);
}

TEST_CASE("embedding lookup scatters gradient into the looked-up rows") {
  Rng rng(5);
  const Matrix t0 = testing::random_matrix(4, 2, rng), t1 = testing::random_matrix(3, 2, rng);
  // Two rows, two fields; row 1 repeats id 2 of field 0 to test accumulation.
  const std::vector<std::size_t> ids = {2, 0, 2, 1};
  const OpFn op = [&](const std::vector<Var>& v) { return ad::embedding_lookup(v, ids, 2); };
  CHECK(op_grad_error(op, {t0, t1}, rng) < 1e-6);
  ad::NoGradGuard g;
  const Var out = ad::embedding_lookup(std::vector<Var>{Var(t0), Var(t1)}, ids, 2);
  REQUIRE(out.rows() == 2);
  REQUIRE(out.cols() == 4);
  CHECK(out.value()(0, 0) == t0(2, 0));
  CHECK(out.value()(0, 3) == t1(0, 1));
  CHECK(out.value()(1, 2) == t1(1, 0));
}

TEST_CASE("second derivatives through create_graph match differences of the first") {
  Rng rng(202);
  const double tol = 1e-6;
  const Matrix a = testing::random_matrix(3, 4, rng), b = testing::random_matrix(4, 2, rng);
  const Matrix c = testing::random_matrix(3, 4, rng), row = testing::random_matrix(1, 4, rng);
  const Matrix col = testing::random_matrix(3, 1, rng);
  CHECK(op_second_order_error([](auto& v) { return ad::sigmoid(ad::matmul(v[0], v[1])); }, {a, b}, rng) < tol);
  CHECK(op_second_order_error([](auto& v) { return ad::mul(ad::mul(v[0], v[1]), v[0]); }, {a, c}, rng) < tol);
  CHECK(op_second_order_error([](auto& v) { return ad::softplus(ad::add_row(v[0], v[1])); }, {a, row}, rng) < tol);
  CHECK(op_second_order_error([](auto& v) { return ad::sigmoid(ad::mul_col(v[0], v[1])); }, {a, col}, rng) < tol);
  CHECK(op_second_order_error(
            [](auto& v) { return ad::bce_with_logits(ad::matmul(v[0], v[1]), ad::sigmoid(v[2])); },
            {a, b, testing::random_matrix(3, 2, rng)}, rng) < tol);
  CHECK(op_second_order_error([](auto& v) { return ad::mul(ad::relu(v[0]), v[0]); }, {away_from_zero(3, 4, rng)},
                              rng) < tol);
}

TEST_CASE("gradient: constant loss gives zeros, half squared norm gives params") {
  ParamVector p;
  p.add_segment("w", 2, 3);
  p.add_segment("b", 1, 3);
  Rng rng(1);
  testing::randomize(p, rng);
  const auto g0 = diffgrad::gradient([](std::span<const Var>) { return Var::scalar(3.5); }, p);
  for (double v : g0.values()) CHECK(v == 0.0);
  const auto g1 = diffgrad::gradient(
      [](std::span<const Var> v) {
        Var s = Var::scalar(0.0);
        for (const auto& x : v) s = ad::add(s, ad::sum(ad::mul(x, x)));
        return ad::scale(s, 0.5);
      },
      p);
  CHECK(g1.same_layout(p));
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(g1.values()[i] == doctest::Approx(p.values()[i]).epsilon(1e-15));
}

TEST_CASE("gradient of a 37-parameter two-layer net matches finite differences") {
  const auto net = small_net(4, {5}, 2);
  ParamVector p = net.init(9);
  REQUIRE(p.size() == 37);
  Rng rng(17);
  const Matrix x = testing::random_matrix(6, 4, rng);
  const Matrix y = testing::random_binary(6, 2, rng);
  auto loss = [&](std::span<const Var> v) { return ad::sum(ad::bce_with_logits(net.forward(v, Var(x)).logits, Var(y))); };
  const auto g = diffgrad::gradient(loss, p);
  auto f = [&](const std::vector<double>& vals) {
    ParamVector q = p;
    std::copy(vals.begin(), vals.end(), q.values().begin());
    ad::NoGradGuard guard;
    return loss(q.to_vars(false)).item();
  };
  const std::vector<double> x0(p.values().begin(), p.values().end());
  const auto fd = fd_gradient(f, x0, 1e-6);
  CHECK(max_rel_err(std::vector<double>(g.values().begin(), g.values().end()), fd, 1e-6) < 1e-6);
}

TEST_CASE("gradient reports non-finite values as numerical errors naming the segment") {
  ParamVector p;
  p.add_segment("alpha", 1, 2);
  p.values()[0] = 1.0;
  try {
    diffgrad::gradient(
        [](std::span<const Var> v) {
          return ad::sum(ad::mul(v[0], Var(Matrix(1, 2, std::numeric_limits<double>::infinity()))));
        },
        p);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNumerical);
  }
  ParamVector q;
  q.add_segment("beta", 1, 1);
  try {
    // Loss is exactly zero at v = 0 but the chained scale overflows the gradient.
    diffgrad::gradient(
        [](std::span<const Var> v) { return ad::sum(ad::mul(ad::scale(v[0], 1e200), Var(Matrix(1, 1, 1e200)))); },
        q);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNumerical);
    CHECK(std::string(e.what()).find("beta") != std::string::npos);
  }
}

TEST_CASE("ParamVector layout invariants") {
  ParamVector p;
  p.add_segment("a", 2, 2);
  p.add_segment("b", 3, 1);
  CHECK(p.size() == 7);
  CHECK(p.index_of("b") == 1);
  CHECK(p.layout()[1].offset == 4);
  CHECK_THROWS_AS(p.add_segment("a", 1, 1), Error);
  const auto z = p.zeros_like();
  CHECK(z.same_layout(p));
}

TEST_CASE("per-sample gradients: singleton, duplicates, and linearity") {
  const auto net = small_net(3, {4}, 2);
  const ParamVector p = net.init(3);
  Rng rng(23);
  const Matrix x = testing::random_matrix(8, 3, rng);
  const Matrix y = testing::random_binary(8, 2, rng);
  auto sample = [&](std::span<const Var> v, std::size_t i) {
    const Matrix xi = gather_rows(x, std::vector<std::size_t>{i});
    const Matrix yi = gather_rows(y, std::vector<std::size_t>{i});
    return ad::sum(ad::bce_with_logits(net.forward(v, Var(xi)).logits, Var(yi)));
  };
  const auto ps = diffgrad::per_sample_gradient(sample, p, 8);
  REQUIRE(ps.size() == 8);
  const auto single = diffgrad::per_sample_gradient(sample, p, 1);
  CHECK(single[0] == ps[0]);

  // bce_with_logits already averages over rows.
  auto mean_loss = [&](std::span<const Var> v) { return ad::bce_with_logits(net.forward(v, Var(x)).logits, Var(y)); };
  const auto gb = diffgrad::gradient(mean_loss, p);
  for (std::size_t j = 0; j < p.size(); ++j) {
    double m = 0.0;
    for (const auto& g : ps) m += g.values()[j];
    CHECK(std::abs(m / 8.0 - gb.values()[j]) < 1e-12);
  }

  Matrix xd(2, 3), yd(2, 2);
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < 3; ++c) xd(r, c) = x(0, c);
    for (std::size_t c = 0; c < 2; ++c) yd(r, c) = y(0, c);
  }
  auto dup = [&](std::span<const Var> v, std::size_t i) {
    const Matrix xi = gather_rows(xd, std::vector<std::size_t>{i});
    const Matrix yi = gather_rows(yd, std::vector<std::size_t>{i});
    return ad::sum(ad::bce_with_logits(net.forward(v, Var(xi)).logits, Var(yi)));
  };
  const auto pd = diffgrad::per_sample_gradient(dup, p, 2);
  CHECK(pd[0] == pd[1]);
  CHECK_THROWS_AS(diffgrad::per_sample_gradient(dup, p, 0), Error);
}

TEST_CASE("ghost features reproduce the final-layer per-sample gradient") {
  Rng rng(31);
  for (auto arch : {model::Arch::kMlp, model::Arch::kCross}) {
    for (const auto& hidden : {std::vector<std::size_t>{}, std::vector<std::size_t>{6, 4}}) {
      const auto net = small_net(5, hidden, 3, arch);
      ParamVector p = net.init(4);
      testing::randomize(p, rng, 0.4);
      const Matrix x = testing::random_matrix(1, 5, rng);
      const Matrix y = testing::random_binary(1, 3, rng);
      const auto gf = diffgrad::ghost_features(net, p, x, y);
      for (double r : gf.residual) CHECK(std::abs(r) <= 1.0);
      const auto g = diffgrad::gradient(
          [&](std::span<const Var> v) { return ad::sum(ad::bce_with_logits(net.forward(v, Var(x)).logits, Var(y))); },
          p);
      const auto head = *net.final_affine();
      const auto gw = g.segment(head.weight);
      const auto gb = g.segment(head.bias);
      const std::size_t K = gf.residual.size();
      for (std::size_t j = 0; j < gf.hidden.size(); ++j) {
        for (std::size_t k = 0; k < K; ++k) CHECK(std::abs(gw[j * K + k] - gf.hidden[j] * gf.residual[k]) < 1e-12);
      }
      for (std::size_t k = 0; k < K; ++k) CHECK(std::abs(gb[k] - gf.residual[k]) < 1e-12);
    }
  }
}

TEST_CASE("ghost features: perfect fit gives zero residual; ghost_dot matches explicit dot") {
  const auto net = small_net(4, {3}, 2);
  ParamVector p = net.init(8);
  Rng rng(41);
  const Matrix x = testing::random_matrix(1, 4, rng);
  Matrix y(1, 2);
  {
    ad::NoGradGuard g;
    const auto logits = net.forward(p.to_vars(false), Var(x)).logits.value();
    for (std::size_t k = 0; k < 2; ++k) y(0, k) = ad::stable_sigmoid(logits(0, k));
  }
  const auto gf = diffgrad::ghost_features(net, p, x, y);
  for (double r : gf.residual) CHECK(r == 0.0);

  const auto head = *net.final_affine();
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix xa = testing::random_matrix(1, 4, rng), xb = testing::random_matrix(1, 4, rng);
    const Matrix ya = testing::random_binary(1, 2, rng), yb = testing::random_binary(1, 2, rng);
    auto g = [&](const Matrix& xi, const Matrix& yi) {
      return diffgrad::gradient(
          [&](std::span<const Var> v) { return ad::sum(ad::bce_with_logits(net.forward(v, Var(xi)).logits, Var(yi))); },
          p);
    };
    const auto ga = g(xa, ya), gb = g(xb, yb);
    double explicit_dot = 0.0;
    for (auto seg : {head.weight, head.bias}) {
      const auto sa = ga.segment(seg), sb = gb.segment(seg);
      for (std::size_t i = 0; i < sa.size(); ++i) explicit_dot += sa[i] * sb[i];
    }
    const double ghost =
        diffgrad::ghost_dot(diffgrad::ghost_features(net, p, xa, ya), diffgrad::ghost_features(net, p, xb, yb));
    CHECK(std::abs(ghost - explicit_dot) < 1e-10);
  }
}

TEST_CASE("ghost features need a final affine layer") {
  struct Headless final : diffgrad::DifferentiableModel {
    diffgrad::ForwardResult forward(std::span<const Var> p, const Var& x) const override {
      return {ad::matmul(x, p[0]), Var()};
    }
    std::optional<diffgrad::HeadSegments> final_affine() const override { return std::nullopt; }
  };
  ParamVector p;
  p.add_segment("w", 2, 1);
  try {
    diffgrad::ghost_features(Headless{}, p, Matrix(1, 2, 1.0), Matrix(1, 1, 0.0));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kUnsupportedArchitecture);
  }
}

TEST_CASE("unroll_sgd: empty unroll and zero step size return theta0") {
  const auto net = small_net(3, {2}, 1);
  const ParamVector p = net.init(2);
  Rng rng(3);
  const auto loss = soft_bce(net);
  auto [t0, tape0] = diffgrad::unroll_sgd(p, {}, 0.1, 0, {0, 0}, loss);
  CHECK(t0 == p);
  CHECK(tape0.step_count() == 0);
  const auto batches = random_batches(4, 2, 3, 1, rng);
  auto [t1, tape1] = diffgrad::unroll_sgd(p, batches, 0.0, 4, {1, 2}, loss);
  CHECK(t1 == p);
  CHECK(tape1.step_count() == 4);
}

TEST_CASE("unroll_sgd: one logistic step matches the closed form") {
  // theta scalar, input x, soft target q: loss = softplus(theta x) - q theta x,
  // d/dtheta = (sigmoid(theta x) - q) x.
  ParamVector p;
  p.add_segment("w", 1, 1);
  p.values()[0] = 0.3;
  const double x = 1.5, ylogit = 0.4, lr = 0.2;
  const diffgrad::InnerLoss loss = [](std::span<const Var> v, const Var& in, const Var& y) {
    return ad::sum(ad::bce_with_logits(ad::matmul(in, v[0]), ad::sigmoid(y)));
  };
  std::vector<diffgrad::InnerBatch> b{{Matrix(1, 1, x), Matrix(1, 1, ylogit), 0}};
  auto [t1, tape] = diffgrad::unroll_sgd(p, b, lr, 1, {0, 1}, loss);
  const double q = 1.0 / (1.0 + std::exp(-ylogit));
  const double expect = 0.3 - lr * (1.0 / (1.0 + std::exp(-0.3 * x)) - q) * x;
  CHECK(std::abs(t1.values()[0] - expect) < 1e-15);
}

TEST_CASE("unroll_sgd: contract and divergence errors") {
  const auto net = small_net(2, {}, 1);
  const ParamVector p = net.init(1);
  Rng rng(5);
  const auto loss = soft_bce(net);
  const auto batches = random_batches(3, 2, 2, 1, rng);
  CHECK_THROWS_AS(diffgrad::unroll_sgd(p, batches, 0.1, 2, {0, 1}, loss), Error);
  CHECK_THROWS_AS(diffgrad::unroll_sgd(p, batches, 0.1, 3, {2, 2}, loss), Error);
  CHECK_THROWS_AS(diffgrad::unroll_sgd(p, batches, 0.1, 3, {0, 0}, loss), Error);
  CHECK_THROWS_AS(diffgrad::unroll_sgd(p, batches, -1.0, 3, {0, 1}, loss), Error);
  auto poisoned = batches;
  poisoned[1].inputs(0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    diffgrad::unroll_sgd(p, poisoned, 0.1, 3, {2, 1}, loss);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDivergence);
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("truncated meta-gradient: constant meta loss gives zeros") {
  const auto net = small_net(3, {4}, 2);
  const ParamVector p = net.init(6);
  Rng rng(7);
  const auto batches = random_batches(4, 3, 3, 2, rng);
  auto [theta, tape] = diffgrad::unroll_sgd(p, batches, 0.1, 4, {1, 2}, soft_bce(net));
  const auto g = diffgrad::truncated_meta_gradient(tape, [](std::span<const Var>) { return Var::scalar(1.0); });
  REQUIRE(g.size() == 4);
  for (const auto& s : g) {
    for (double v : s.d_inputs.data) CHECK(v == 0.0);
    for (double v : s.d_target_logits.data) CHECK(v == 0.0);
  }
  CHECK_THROWS_AS(diffgrad::truncated_meta_gradient(diffgrad::UnrollTape{}, [](std::span<const Var>) {
                    return Var::scalar(1.0);
                  }),
                  Error);
}

TEST_CASE("truncated meta-gradient with the full window matches finite differences") {
  const auto net = small_net(4, {6}, 2);
  ParamVector p = net.init(12);
  Rng rng(71);
  const std::size_t M = 4;
  auto batches = random_batches(M, 2, 4, 2, rng);
  const Matrix hx = testing::random_matrix(5, 4, rng);
  const Matrix hy = testing::random_binary(5, 2, rng);
  const diffgrad::ParamLoss meta = [&](std::span<const Var> v) {
    return ad::sum(ad::bce_with_logits(net.forward(v, Var(hx)).logits, Var(hy)));
  };
  const auto loss = soft_bce(net);
  auto [theta, tape] = diffgrad::unroll_sgd(p, batches, 0.3, M, {0, M}, loss);
  const auto g = diffgrad::truncated_meta_gradient(tape, meta);

  auto meta_after = [&](const std::vector<diffgrad::InnerBatch>& bs) {
    const ParamVector t = testing::sgd_forward(p, bs, 0.3, loss);
    ad::NoGradGuard guard;
    return meta(t.to_vars(false)).item();
  };
  for (std::size_t m = 0; m < M; ++m) {
    auto fe = [&](const std::vector<double>& x) {
      auto bs = batches;
      bs[m].inputs.data = x;
      return meta_after(bs);
    };
    auto fy = [&](const std::vector<double>& x) {
      auto bs = batches;
      bs[m].target_logits.data = x;
      return meta_after(bs);
    };
    CHECK(max_rel_err(g[m].d_inputs.data, fd_gradient(fe, batches[m].inputs.data, 1e-5), 1e-7) < 1e-6);
    CHECK(max_rel_err(g[m].d_target_logits.data, fd_gradient(fy, batches[m].target_logits.data, 1e-5), 1e-7) < 1e-6);
  }
}

TEST_CASE("truncated meta-gradient matches the stop-gradient replay for every window") {
  const auto net = small_net(3, {5}, 2, model::Arch::kCross);
  ParamVector p = net.init(5);
  Rng rng(83);
  const std::size_t M = 5;
  const auto batches = random_batches(M, 3, 3, 2, rng);
  const Matrix hx = testing::random_matrix(4, 3, rng);
  const Matrix hy = testing::random_binary(4, 2, rng);
  const diffgrad::ParamLoss meta = [&](std::span<const Var> v) {
    return ad::sum(ad::bce_with_logits(net.forward(v, Var(hx)).logits, Var(hy)));
  };
  const auto loss = soft_bce(net);
  for (std::size_t w = 1; w <= M; ++w) {
    for (std::size_t u = 0; u + w <= M; ++u) {
      CAPTURE(u);
      CAPTURE(w);
      auto [theta, tape] = diffgrad::unroll_sgd(p, batches, 0.2, M, {u, w}, loss);
      CHECK(tape.recorded_steps() == M - u);
      const auto g = diffgrad::truncated_meta_gradient(tape, meta);
      const auto r = testing::replay_meta_gradient(p, batches, 0.2, u, w, loss, meta);
      for (std::size_t m = 0; m < M; ++m) {
        CHECK(testing::max_abs_diff(g[m].d_inputs.data, r.d_inputs[m].data) < 1e-10);
        CHECK(testing::max_abs_diff(g[m].d_target_logits.data, r.d_target_logits[m].data) < 1e-10);
        if (m < u || m >= u + w) {
          CHECK(testing::max_abs(g[m].d_inputs.data) == 0.0);
          CHECK(testing::max_abs(g[m].d_target_logits.data) == 0.0);
        }
      }
    }
  }
}

TEST_CASE("unroll and meta-gradient are bitwise deterministic") {
  const auto net = small_net(3, {4}, 1);
  const ParamVector p = net.init(99);
  Rng rng(2);
  const auto batches = random_batches(3, 2, 3, 1, rng);
  const Matrix hx = testing::random_matrix(2, 3, rng);
  const diffgrad::ParamLoss meta = [&](std::span<const Var> v) {
    return ad::sum(ad::sigmoid(net.forward(v, Var(hx)).logits));
  };
  auto run = [&] {
    auto [t, tape] = diffgrad::unroll_sgd(p, batches, 0.1, 3, {1, 2}, soft_bce(net));
    return std::make_pair(t, diffgrad::truncated_meta_gradient(tape, meta));
  };
  const auto a = run(), b = run();
  CHECK(a.first == b.first);
  for (std::size_t m = 0; m < 3; ++m) CHECK(a.second[m].d_inputs == b.second[m].d_inputs);
}
