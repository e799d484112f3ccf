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
#include <random>

#include "doctest.h"
#include "m3el/errors.hpp"
#include "m3el/grad_check.hpp"
#include "m3el/icl.hpp"
#include "oracles.hpp"

using namespace m3el;

namespace {

double total(const Tensor& te, const Tensor& tm, const Tensor& ve, const Tensor& vm, const IclConfig& cfg) {
  ad::Graph g;
  return g.value(total_cl_loss(g, g.constant(te), g.constant(tm), g.constant(ve), g.constant(vm), cfg)).item();
}

Tensor rnd(std::size_t r, std::size_t c, std::mt19937_64& rng) { return oracle::to_tensor(oracle::random_mat(r, c, rng)); }

}  // namespace

TEST_CASE("cosine examples") {
  const std::vector<double> v{3, -4, 12}, e1{1, 0}, e2{0, 1}, a{1, 2}, b{2, 1};
  CHECK(cosine_sim(v, v) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(cosine_sim(e1, e2) == 0.0);
  CHECK(cosine_sim(a, b) == doctest::Approx(0.8).epsilon(1e-9));
  const std::vector<double> zero{0, 0};
  CHECK(cosine_sim(zero, e1) == 0.0);
  CHECK_THROWS_AS(cosine_sim(a, v), ContractError);
}

TEST_CASE("cosine is scale invariant") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    const auto x = oracle::random_mat(1, 6, rng, 10.0)[0], y = oracle::random_mat(1, 6, rng, 10.0)[0];
    auto cx = x;
    for (auto& v : cx) v *= 3.7;
    CHECK(std::abs(cosine_sim(cx, y) - cosine_sim(x, y)) < 1e-9);
  }
}

TEST_CASE("negative sets exclude the anchor") {
  const auto s = negative_sets(2, 5);
  CHECK(s.inner == std::vector<std::size_t>{0, 1, 3, 4});
  CHECK(s.inter == s.inner);
  CHECK(negative_sets(0, 1).inner.empty());
}

TEST_CASE("pair loss closed forms") {
  std::mt19937_64 rng(3);
  const Tensor a = rnd(4, 5, rng), p = rnd(4, 5, rng);
  for (std::size_t i = 0; i < 4; ++i) CHECK(pair_loss(i, a, p, {0.03, 0.0, 0.0}) == 0.0);
  CHECK(total(a, p, p, a, {0.03, 0.0, 0.0}) == 0.0);
  CHECK(pair_loss(0, a.row_copy(0), p.row_copy(0), {0.03, 0.8, 1.0}) == doctest::Approx(0.0));

  const Tensor same = Tensor::from_rows({{1, 2, 3}, {1, 2, 3}});
  CHECK(std::abs(pair_loss(0, same, same, {1.0, 1.0, 1.0}) - std::log(3.0)) < 1e-12);
  CHECK(std::abs(total(same, same, same, same, {1.0, 1.0, 1.0}) - std::log(3.0)) < 1e-12);
}

TEST_CASE("total loss matches the scalar formula") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 10; ++t) {
    const auto te = oracle::random_mat(3, 4, rng), tm = oracle::random_mat(3, 4, rng);
    const auto ve = oracle::random_mat(3, 4, rng), vm = oracle::random_mat(3, 4, rng);
    const double ref = oracle::icl_total(te, tm, ve, vm, 0.5, 0.8, 1.0);
    const double got = total(oracle::to_tensor(te), oracle::to_tensor(tm), oracle::to_tensor(ve),
                             oracle::to_tensor(vm), {0.5, 0.8, 1.0});
    CHECK(std::abs(got - ref) < 1e-12);
    // pair_loss is the per-term view of the same thing
    CHECK(std::abs(pair_loss(1, oracle::to_tensor(ve), oracle::to_tensor(vm), {0.5, 0.8, 1.0}) -
                   oracle::icl_pair(1, ve, vm, 0.5, 0.8, 1.0)) < 1e-12);
  }
}

TEST_CASE("small temperature does not overflow") {
  std::mt19937_64 rng(5);
  const Tensor a = rnd(6, 8, rng), b = rnd(6, 8, rng);
  for (double tau : {0.03, 0.001, 1e-5}) {
    const double v = total(a, b, b, a, {tau, 0.8, 1.0});
    CHECK(std::isfinite(v));
    CHECK(v >= 0.0);
    CHECK(std::isfinite(pair_loss(0, a, b, {tau, 0.8, 1.0})));
  }
}

TEST_CASE("loss is non-negative and non-decreasing in gamma") {
  std::mt19937_64 rng(8);
  const Tensor te = rnd(5, 4, rng), tm = rnd(5, 4, rng), ve = rnd(5, 3, rng), vm = rnd(5, 3, rng);
  double prev = -1.0;
  for (double gamma : {0.0, 0.1, 0.5, 1.0, 2.0, 10.0}) {
    const double v = total(te, tm, ve, vm, {0.1, 0.8, gamma});
    CHECK(v >= 0.0);
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("config and shape errors") {
  CHECK_THROWS_AS((IclConfig{0.0, 0.8, 1.0}.validate()), ConfigError);
  CHECK_THROWS_AS((IclConfig{0.1, -1.0, 1.0}.validate()), ConfigError);
  CHECK_THROWS_AS((IclConfig{0.1, 0.8, -0.5}.validate()), ConfigError);
  const Tensor a(2, 3, 1.0), b(3, 3, 1.0);
  CHECK_THROWS_AS(pair_loss(0, a, a, {-1.0, 0.8, 1.0}), ConfigError);
  CHECK_THROWS_AS(total(a, b, a, a, {}), ContractError);
}

TEST_CASE("gradients of the contrastive loss") {
  std::mt19937_64 rng(21);
  ParamStore store;
  const auto te = store.add("te", rnd(4, 5, rng));
  const auto tm = store.add("tm", rnd(4, 5, rng));
  const auto ve = store.add("ve", rnd(4, 3, rng));
  const auto vm = store.add("vm", rnd(4, 3, rng));
  for (double tau : {0.5, 0.1}) {
    CAPTURE(tau);
    auto build = [&](ParamBinding& p) { return total_cl_loss(p.graph(), p(te), p(tm), p(ve), p(vm), {tau, 0.8, 1.0}); };
    const auto r = grad_check(build, store);
    CHECK(r.checked == 4 * 5 * 2 + 4 * 3 * 2);
    CHECK(r.max_rel_error < 1e-4);
  }
}
