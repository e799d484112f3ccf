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
#include "m3el/accounting.hpp"
#include "m3el/config.hpp"

using namespace m3el;

namespace {

// Three affines per modality in the matching network, two projections plus
// K head logits per direction in the cross-modal network.
std::size_t closed_form(std::size_t dt, std::size_t dv, std::size_t ds, std::size_t k) {
  const auto aff = [](std::size_t in, std::size_t out) { return in * out + out; };
  return 3 * aff(dt, ds) + 3 * aff(dv, ds) + aff(dt, dt) + aff(dv, dt) + k + aff(dv, dv) + aff(dt, dv) + k;
}

}  // namespace

TEST_CASE("default parameter count") {
  const ParamCount c = count_params(init_model(ModelDims{}, 0));
  CHECK(c.total == 546570);
  CHECK(closed_form(512, 96, 96, 5) == 546570);
  const std::vector<std::pair<std::string, std::size_t>> groups{
      {"imn.text", 147744}, {"imn.vision", 27936}, {"cmn.t2v", 312325}, {"cmn.v2t", 58565}};
  CHECK(c.components == groups);
  CHECK(512 * 96 + 96 == 49248);
}

TEST_CASE("closed form holds across shapes") {
  for (std::size_t dt : {4, 13, 64})
    for (std::size_t dv : {3, 8})
      for (std::size_t ds : {2, 9})
        for (std::size_t k : {1, 5}) {
          ModelDims d{dt, dv, dv, ds, k};
          CHECK(count_params(init_model(d, 1)).total == closed_form(dt, dv, ds, k));
        }
  ModelDims heads{512, 96, 96, 96, 6};
  CHECK(count_params(init_model(heads, 0)).total - count_params(init_model(ModelDims{}, 0)).total == 2);
}

TEST_CASE("flops") {
  CHECK(matmul_flops(2, 3, 4) == 48);
  const TrainConfig cfg;
  const ScoreOptions opts = score_options(cfg.loss);
  const auto f = [&](std::size_t m, std::size_t c) { return estimate_flops(cfg.dims, cfg.pad, opts, {m, c}); };
  const std::uint64_t base = f(1, 1);
  CHECK(base > 0);
  for (std::size_t m : {2, 5, 32}) CHECK(f(m, 1) == m * base);
  const std::uint64_t step = f(1, 2) - f(1, 1);
  for (std::size_t c : {3, 8}) CHECK(f(1, c) == f(1, 1) + (c - 1) * step);
  CHECK(f(4, 8) == 4 * f(1, 8));

  TrainConfig lean = cfg;
  lean.loss = apply_loss_variant(cfg.loss, "no_cross_module");
  CHECK(estimate_flops(lean.dims, lean.pad, score_options(lean.loss), {1, 1}) < base);
}
