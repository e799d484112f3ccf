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

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "m3el/params.hpp"
#include "m3el/tensor.hpp"

namespace m3el {

struct AdamWConfig {
  double lr = 1e-5;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;
  AdamWConfig config;

  bool operator==(const OptimizerState& o) const {
    return m == o.m && v == o.v && step == o.step && config.lr == o.config.lr &&
           config.weight_decay == o.config.weight_decay && config.beta1 == o.config.beta1 &&
           config.beta2 == o.config.beta2 && config.eps == o.config.eps;
  }
};

OptimizerState make_optimizer_state(const ParamStore& params, const AdamWConfig& config);

// Decoupled weight decay:
//   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)
void adamw_step(ParamStore& params, std::span<const Tensor> grads, OptimizerState& state);

// Scales all gradients so their joint L2 norm is at most max_norm. Returns
// the norm before clipping.
double clip_global_norm(std::span<Tensor> grads, double max_norm);

}  // namespace m3el
