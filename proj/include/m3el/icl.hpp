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

#include <cstddef>
#include <span>
#include <vector>

#include "m3el/autodiff.hpp"
#include "m3el/tensor.hpp"

namespace m3el {

// Intra-modal contrastive learning over global features.
struct IclConfig {
  double tau = 0.03;   // temperature
  double beta = 0.8;   // inner-source (same view) negative weight
  double gamma = 1.0;  // inter-source (other view) negative weight

  void validate() const;  // ConfigError unless tau > 0, beta >= 0, gamma >= 0
};

inline constexpr double kCosineEps = 1e-8;

// x.y / (|x||y| + 1e-8); zero vectors give 0.
double cosine_sim(std::span<const double> x, std::span<const double> y);

struct NegativeSets {
  std::vector<std::size_t> inner;  // same view, j != i
  std::vector<std::size_t> inter;  // other view, j != i
};

NegativeSets negative_sets(std::size_t anchor, std::size_t u);

// Loss of the positive pair (anchors[i], positives[i]):
//   -log( t(a,p) / (t(a,p) + beta * sum_inner t(a,a_j) + gamma * sum_inter t(a,p_j)) )
// with t(x,y) = exp(cos(x,y) / tau). Rows of `anchors` and `positives` are
// the anchor view and the other view. Evaluated directly, no graph.
double pair_loss(std::size_t i, const Tensor& anchors, const Tensor& positives, const IclConfig& cfg);

// Column of the u pair losses for one direction (anchor view -> other view).
ad::Var directional_cl_losses(ad::Graph& g, ad::Var anchors, ad::Var positives, const IclConfig& cfg);

// Mean over the 4u directional terms: text e->m, m->e, vision e->m, m->e.
ad::Var total_cl_loss(ad::Graph& g, ad::Var text_entity, ad::Var text_mention, ad::Var vision_entity,
                      ad::Var vision_mention, const IclConfig& cfg);

}  // namespace m3el
