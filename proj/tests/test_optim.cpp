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
#include <vector>

#include "doctest.h"
#include "m3el/errors.hpp"
#include "m3el/optim.hpp"
#include "m3el/params.hpp"

using m3el::Tensor;

namespace {

struct Scalar {
  m3el::ParamStore store;
  m3el::OptimizerState state;
  Scalar(double p, const m3el::AdamWConfig& cfg) {
    store.add("p", Tensor::scalar(p));
    state = m3el::make_optimizer_state(store, cfg);
  }
  double step(double grad) {
    std::vector<Tensor> g{Tensor::scalar(grad)};
    m3el::adamw_step(store, g, state);
    return store.at(0).item();
  }
};

}  // namespace

TEST_CASE("zero gradient only decays") {
  Scalar s(1.0, {0.1, 0.01, 0.9, 0.999, 1e-8});
  CHECK(s.step(0.0) == doctest::Approx(0.999).epsilon(1e-15));
}

TEST_CASE("first step with unit gradient moves by about lr") {
  Scalar s(1.0, {0.1, 0.0, 0.9, 0.999, 1e-8});
  CHECK(std::abs(s.step(1.0) - 0.9) < 1e-7);
}

TEST_CASE("three-step trace matches a hand-rolled reference") {
  const double lr = 0.05, wd = 0.02, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  Scalar s(0.7, {lr, wd, b1, b2, eps});
  double p = 0.7, m = 0.0, v = 0.0;
  const double grads[] = {0.3, -1.2, 0.05};
  for (int t = 1; t <= 3; ++t) {
    const double g = grads[t - 1];
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    p = p - lr * (mh / (std::sqrt(vh) + eps) + wd * p);
    CHECK(std::abs(s.step(g) - p) < 1e-15);
  }
  CHECK(s.state.step == 3);
}

TEST_CASE("zero gradient and zero decay is the identity") {
  Scalar s(-2.5, {0.3, 0.0, 0.9, 0.999, 1e-8});
  for (int i = 0; i < 5; ++i) CHECK(s.step(0.0) == -2.5);
}

TEST_CASE("zero learning rate leaves params bit-identical") {
  Scalar s(0.123456789, {0.0, 0.01, 0.9, 0.999, 1e-8});
  CHECK(s.step(3.0) == 0.123456789);
}

TEST_CASE("shape and count mismatches are contract errors") {
  m3el::ParamStore store;
  store.add("w", Tensor(2, 2));
  auto state = m3el::make_optimizer_state(store, {});
  std::vector<Tensor> wrong{Tensor(2, 3)};
  CHECK_THROWS_AS(m3el::adamw_step(store, wrong, state), m3el::ContractError);
  std::vector<Tensor> none;
  CHECK_THROWS_AS(m3el::adamw_step(store, none, state), m3el::ContractError);
  std::vector<Tensor> ok{Tensor(2, 2)};
  state.config.lr = -1.0;
  CHECK_THROWS_AS(m3el::adamw_step(store, ok, state), m3el::ContractError);
}

TEST_CASE("global norm clipping") {
  std::vector<Tensor> g{Tensor::row({3.0}), Tensor::row({4.0})};
  CHECK(m3el::clip_global_norm(g, 1.0) == doctest::Approx(5.0));
  CHECK(g[0].item() == doctest::Approx(0.6));
  CHECK(g[1].item() == doctest::Approx(0.8));
  std::vector<Tensor> small{Tensor::row({0.3})};
  CHECK(m3el::clip_global_norm(small, 1.0) == doctest::Approx(0.3));
  CHECK(small[0].item() == 0.3);
}
