// Copyright 2026 The M3EL Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <functional>
#include <random>

#include "doctest.h"
#include "m3el/autodiff.hpp"
#include "m3el/errors.hpp"
#include "oracles.hpp"

using m3el::Mask;
using m3el::Tensor;
namespace ad = m3el::ad;

namespace {

// Builds loss(x) in a fresh graph; returns the value and the analytic grad.
using Build = std::function<ad::Var(ad::Graph&, ad::Var)>;

double eval(const Build& f, const Tensor& x) {
  ad::Graph g;
  return g.value(f(g, g.input(x))).item();
}

// Central differences, written out here rather than borrowed from grad_check.
double max_grad_error(const Build& f, const Tensor& x0) {
  ad::Graph g;
  const ad::Var x = g.input(x0);
  const ad::Var loss = f(g, x);
  const Tensor analytic = g.backward(loss)[x];
  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t i = 0; i < x0.size(); ++i) {
    Tensor plus = x0, minus = x0;
    plus[i] += h;
    minus[i] -= h;
    const double numeric = (eval(f, plus) - eval(f, minus)) / (2 * h);
    const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-6});
    worst = std::max(worst, std::abs(numeric - analytic[i]) / denom);
  }
  return worst;
}

Tensor random_tensor(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return oracle::to_tensor(oracle::random_mat(r, c, rng));
}

// Weighted sum so every output entry gets a distinct upstream gradient.
ad::Var probe(ad::Graph& g, ad::Var y) {
  const Tensor& v = g.value(y);
  Tensor w(v.rows(), v.cols());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.3 + 0.17 * static_cast<double>(i % 7);
  return g.sum(g.mul(y, g.constant(w)));
}

}  // namespace

TEST_CASE("row_softmax examples") {
  ad::Graph g;
  const auto a = g.row_softmax(g.constant(Tensor::row({0, 0})));
  CHECK(g.value(a)(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(g.value(a)(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(g.value(g.row_softmax(g.constant(Tensor::row({3.7}))))(0, 0) == 1.0);

  const auto b = g.value(g.row_softmax(g.constant(Tensor::row({1, 2, 3}))));
  const double s = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(b(0, i) - std::exp(i + 1.0) / s) < 1e-12);
}

TEST_CASE("row_softmax rows sum to one, even at 1e6 magnitudes") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  ad::Graph g;
  Tensor x(6, 9);
  for (auto& v : x.data()) v = u(rng);
  const Tensor& y = g.value(g.row_softmax(g.constant(x)));
  CHECK(y.all_finite());
  for (std::size_t r = 0; r < y.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < y.cols(); ++c) s += y(r, c);
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("masked softmax ignores masked entries and fails when all are masked") {
  ad::Graph g;
  const Tensor x = Tensor::row({1.0, 50.0, 2.0});
  const Tensor& y = g.value(g.row_softmax(g.constant(x), Mask{1, 0, 1}));
  CHECK(y(0, 1) == 0.0);
  CHECK(std::abs(y(0, 0) - 1.0 / (1.0 + std::exp(1.0))) < 1e-12);
  CHECK_THROWS_AS(g.row_softmax(g.constant(x), Mask{0, 0, 0}), m3el::DataError);
  CHECK_THROWS_AS(g.row_softmax(g.constant(x), Mask{1, 0}), m3el::DimensionError);

  const Tensor& z = g.value(g.col_softmax(g.constant(Tensor::from_rows({{1}, {9}, {1}})), Mask{1, 0, 1}));
  CHECK(z(0, 0) == doctest::Approx(0.5));
  CHECK(z(1, 0) == 0.0);
}

TEST_CASE("activations") {
  ad::Graph g;
  CHECK(g.value(g.relu(g.constant(Tensor::row({-1, 2})))) == Tensor::row({0, 2}));
  CHECK(g.value(g.tanh(g.constant(Tensor::scalar(0.0)))).item() == 0.0);
  CHECK(std::abs(g.value(g.tanh(g.constant(Tensor::scalar(30.0)))).item() - 1.0) < 1e-9);
  CHECK(std::abs(g.value(g.tanh(g.constant(Tensor::scalar(-30.0)))).item() + 1.0) < 1e-9);
}

TEST_CASE("pooling examples") {
  ad::Graph g;
  const auto x = g.constant(Tensor::from_rows({{1, 3}, {3, 1}}));
  CHECK(g.value(g.pool_rows(x, ad::Pooling::kMean)) == Tensor::row({2, 2}));
  CHECK(g.value(g.pool_rows(x, ad::Pooling::kMax)) == Tensor::row({3, 3}));
  const Tensor one = Tensor::row({0.25, -4.0, 7.0});
  CHECK(g.value(g.pool_rows(g.constant(one), ad::Pooling::kSoft)) == one);
  // soft pooling: value-softmax weights per column
  const Tensor& s = g.value(g.pool_rows(x, ad::Pooling::kSoft));
  const double w = std::exp(3.0) / (std::exp(1.0) + std::exp(3.0));
  CHECK(std::abs(s(0, 0) - (w * 3 + (1 - w) * 1)) < 1e-12);
  CHECK_THROWS_AS(g.pool_rows(g.constant(Tensor(0, 2)), ad::Pooling::kMean), m3el::DimensionError);
  CHECK_THROWS_AS(g.pool_rows(x, ad::Pooling::kMean, Mask{0, 0}), m3el::DataError);
  CHECK(g.value(g.pool_rows(x, ad::Pooling::kMean, Mask{1, 0})) == Tensor::row({1, 3}));
}

TEST_CASE("pooling names round trip") {
  for (auto p : {ad::Pooling::kMean, ad::Pooling::kMax, ad::Pooling::kSoft}) {
    CHECK(ad::parse_pooling(ad::pooling_name(p)) == p);
  }
  CHECK_THROWS_AS(ad::parse_pooling("median"), m3el::ConfigError);
}

TEST_CASE("backward basics") {
  ad::Graph g;
  const Tensor p0 = Tensor::from_rows({{1, -2, 3}, {0.5, 4, -1}});
  const auto p = g.input(p0);
  const auto grads = g.backward(g.sum(p));
  for (double v : grads[p].data()) CHECK(v == 1.0);

  ad::Graph g2;
  const auto q = g2.input(p0);
  const auto half_sq = g2.scale(g2.sum(g2.mul(q, q)), 0.5);
  CHECK(g2.backward(half_sq)[q] == p0);
}

TEST_CASE("backward rejects non-scalar loss and zero-fills unreachable leaves") {
  ad::Graph g;
  const auto a = g.input(Tensor::row({1, 2}));
  const auto b = g.input(Tensor::row({3, 4, 5}));
  CHECK_THROWS_AS(g.backward(a), m3el::ContractError);
  const auto grads = g.backward(g.sum(a));
  CHECK(grads[b] == Tensor(1, 3));
}

TEST_CASE("non-finite outputs are numeric errors") {
  ad::Graph g;
  CHECK_THROWS_AS(g.exp(g.constant(Tensor::scalar(1000.0))), m3el::NumericError);
  CHECK_THROWS_AS(g.log(g.constant(Tensor::scalar(-1.0))), m3el::NumericError);
}

TEST_CASE("per-op gradients match finite differences") {
  const Tensor a = random_tensor(3, 4, 1);
  const Tensor b = random_tensor(4, 2, 2);
  const Tensor c = random_tensor(3, 4, 3);
  const Tensor bias = random_tensor(1, 4, 4);
  const Tensor pos = [] {
    Tensor t = random_tensor(3, 4, 5);
    for (auto& v : t.data()) v = std::abs(v) + 0.5;
    return t;
  }();

  struct Case {
    const char* name;
    Tensor x;
    Build f;
  };
  const std::vector<Case> cases = {
      {"matmul lhs", a, [&](ad::Graph& g, ad::Var x) { return probe(g, g.matmul(x, g.constant(b))); }},
      {"matmul rhs", b, [&](ad::Graph& g, ad::Var x) { return probe(g, g.matmul(g.constant(a), x)); }},
      {"matmul_nt", a, [&](ad::Graph& g, ad::Var x) { return probe(g, g.matmul_nt(x, g.constant(c))); }},
      {"matmul_nt self", a, [&](ad::Graph& g, ad::Var x) { return probe(g, g.matmul_nt(x, x)); }},
      {"dot", bias,
       [&](ad::Graph& g, ad::Var x) { return g.dot(x, g.constant(Tensor::row({1, -2, 0.5, 3}))); }},
      {"add_bias x", a, [&](ad::Graph& g, ad::Var x) { return probe(g, g.add_bias(x, g.constant(bias))); }},
      {"add_bias b", bias, [&](ad::Graph& g, ad::Var x) { return probe(g, g.add_bias(g.constant(a), x)); }},
      {"sub", a, [&](ad::Graph& g, ad::Var x) { return probe(g, g.sub(g.constant(c), x)); }},
      {"mul", a, [&](ad::Graph& g, ad::Var x) { return probe(g, g.mul(x, g.constant(c))); }},
      {"mul_scalar s", Tensor::scalar(0.7),
       [&](ad::Graph& g, ad::Var x) { return probe(g, g.mul_scalar(x, g.constant(a))); }},
      {"mul_scalar x", a,
       [&](ad::Graph& g, ad::Var x) { return probe(g, g.mul_scalar(g.constant(Tensor::scalar(-1.3)), x)); }},
      {"row_softmax", a, [&](ad::Graph& g, ad::Var x) { return probe(g, g.row_softmax(x)); }},
      {"row_softmax masked", a,
       [&](ad::Graph& g, ad::Var x) { return probe(g, g.row_softmax(x, Mask{1, 0, 1, 1})); }},
      {"col_softmax masked", a,
       [&](ad::Graph& g, ad::Var x) { return probe(g, g.col_softmax(x, Mask{1, 1, 0})); }},
      {"tanh", a, [&](ad::Graph& g, ad::Var x) { return probe(g, g.tanh(x)); }},
      {"exp", a, [&](ad::Graph& g, ad::Var x) { return probe(g, g.exp(x)); }},
      {"log", pos, [&](ad::Graph& g, ad::Var x) { return probe(g, g.log(x)); }},
      {"pool mean", a,
       [&](ad::Graph& g, ad::Var x) { return probe(g, g.pool_rows(x, ad::Pooling::kMean, Mask{1, 0, 1})); }},
      {"pool max", a, [&](ad::Graph& g, ad::Var x) { return probe(g, g.pool_rows(x, ad::Pooling::kMax)); }},
      {"pool soft", a,
       [&](ad::Graph& g, ad::Var x) { return probe(g, g.pool_rows(x, ad::Pooling::kSoft, Mask{0, 1, 1})); }},
      {"concat", a, [&](ad::Graph& g, ad::Var x) { return probe(g, g.concat_rows(x, g.constant(c))); }},
      {"mean", a, [&](ad::Graph& g, ad::Var x) { return g.mean(g.mul(x, x)); }},
      {"row_sum", a, [&](ad::Graph& g, ad::Var x) { return probe(g, g.row_sum(g.mul(x, x))); }},
      {"col_sum", a, [&](ad::Graph& g, ad::Var x) { return probe(g, g.col_sum(g.mul(x, x))); }},
      {"cosine lhs", a, [&](ad::Graph& g, ad::Var x) { return probe(g, g.cosine_matrix(x, g.constant(c))); }},
      {"cosine self", a, [&](ad::Graph& g, ad::Var x) { return probe(g, g.cosine_matrix(x, x)); }},
      {"softmax_ce", a,
       [&](ad::Graph& g, ad::Var x) { return g.softmax_cross_entropy(x, std::vector<std::size_t>{0, 3, 2}); }},
      {"stack", a,
       [&](ad::Graph& g, ad::Var x) {
         const auto s0 = g.dot(g.pool_rows(x, ad::Pooling::kMean), g.constant(bias));
         const auto s1 = g.sum(g.mul(x, x));
         return probe(g, g.stack({s0, s1, s0, s1, s1, s0}, 2, 3));
       }},
  };
  for (const auto& c0 : cases) {
    CAPTURE(c0.name);
    CHECK(max_grad_error(c0.f, c0.x) < 1e-6);
  }
}

TEST_CASE("relu gradient away from the kink") {
  const Tensor x = Tensor::row({-1.5, -0.2, 0.3, 2.0});
  CHECK(max_grad_error([](ad::Graph& g, ad::Var v) { return probe(g, g.relu(v)); }, x) < 1e-8);
  ad::Graph g;
  const auto v = g.input(x);
  const auto grads = g.backward(g.sum(g.relu(v)));
  CHECK(grads[v] == Tensor::row({0, 0, 1, 1}));
}

TEST_CASE("kink signature tracks relu signs and max-pool argmax") {
  ad::Graph g1, g2;
  g1.relu(g1.constant(Tensor::row({-1, 1})));
  g2.relu(g2.constant(Tensor::row({-1, 2})));
  CHECK(g1.kink_signature() == g2.kink_signature());
  ad::Graph g3;
  g3.relu(g3.constant(Tensor::row({1, 1})));
  CHECK(g1.kink_signature() != g3.kink_signature());
}
