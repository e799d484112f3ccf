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

#include "doctest.h"
#include "m3el/errors.hpp"
#include "m3el/grad_check.hpp"

using m3el::Tensor;
namespace ad = m3el::ad;

TEST_CASE("quadratic loss is exact up to roundoff") {
  m3el::ParamStore store;
  const auto w = store.add("w", Tensor::from_rows({{1.5, -0.5, 2.0}, {0.25, 3.0, -1.0}}));
  auto build = [&](m3el::ParamBinding& p) {
    auto& g = p.graph();
    const auto x = p(w);
    return g.scale(g.sum(g.mul(x, x)), 0.5);
  };
  const auto r = m3el::grad_check(build, store);
  CHECK(r.checked == 6);
  CHECK(r.skipped == 0);
  CHECK(r.max_rel_error < 1e-9);
}

TEST_CASE("relu at a kink is skipped, not failed") {
  m3el::ParamStore store;
  const auto w = store.add("w", Tensor::row({0.0, 0.7, -0.4}));
  auto build = [&](m3el::ParamBinding& p) { return p.graph().sum(p.graph().relu(p(w))); };
  const auto r = m3el::grad_check(build, store);
  CHECK(r.skipped == 1);
  CHECK(r.checked == 1);      // the 0.7 coordinate
  CHECK(r.below_noise == 1);  // -0.4: relu is flat there, both sides are zero
  CHECK(r.max_rel_error < 1e-9);
}

TEST_CASE("a shift that softmax cancels is classed below noise, not failed") {
  m3el::ParamStore store;
  const auto x = store.add("x", Tensor::row({0.3, -1.2, 2.0}));
  const auto shift = store.add("shift", Tensor::scalar(0.4));
  auto build = [&](m3el::ParamBinding& p) {
    auto& g = p.graph();
    const auto shifted = g.add(p(x), g.mul_scalar(p(shift), g.constant(Tensor(1, 3, 1.0))));
    const auto w = g.row_softmax(shifted);
    return g.dot(w, g.constant(Tensor::row({1.0, 5.0, -2.0})));
  };
  const auto r = m3el::grad_check(build, store);
  CHECK(r.checked == 3);
  CHECK(r.below_noise == 1);
  CHECK(r.max_rel_error < 1e-8);
}

TEST_CASE("the checker is not blind: truncation error shows at high curvature") {
  // exp(300 w) has third derivative ~ 300^3 times the value; central
  // differences at h = 1e-4 are visibly off.
  m3el::ParamStore store;
  const auto w = store.add("w", Tensor::row({0.01}));
  auto build = [&](m3el::ParamBinding& p) {
    auto& g = p.graph();
    return g.sum(g.exp(g.scale(p(w), 300.0)));
  };
  const auto r = m3el::grad_check(build, store, {1e-4, 0, 0});
  CHECK(r.max_rel_error > 1e-4);
  CHECK(r.worst == "w[0]");
}

TEST_CASE("step size must be in range") {
  m3el::ParamStore store;
  const auto w = store.add("w", Tensor::scalar(1.0));
  auto build = [&](m3el::ParamBinding& p) { return p.graph().sum(p(w)); };
  CHECK_THROWS_AS(m3el::grad_check(build, store, {1e-3, 0, 0}), m3el::ContractError);
  CHECK_THROWS_AS(m3el::grad_check(build, store, {1e-7, 0, 0}), m3el::ContractError);
}

TEST_CASE("non-finite probe is a numeric error") {
  m3el::ParamStore store;
  const auto w = store.add("w", Tensor::scalar(1e-7));
  auto build = [&](m3el::ParamBinding& p) { return p.graph().sum(p.graph().log(p(w))); };
  CHECK_THROWS_AS(m3el::grad_check(build, store, {1e-5, 0, 0}), m3el::NumericError);
}

TEST_CASE("coordinate sampling honours the cap") {
  m3el::ParamStore store;
  const auto w = store.add("w", Tensor(4, 5, 0.5));
  auto build = [&](m3el::ParamBinding& p) {
    auto& g = p.graph();
    return g.sum(g.tanh(p(w)));
  };
  const auto r = m3el::grad_check(build, store, {1e-5, 3, 9});
  CHECK(r.checked == 3);
  CHECK(r.max_rel_error < 1e-8);
}
