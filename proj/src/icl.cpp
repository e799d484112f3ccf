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

#include "m3el/icl.hpp"

#include <algorithm>
#include <cmath>

#include "m3el/errors.hpp"

namespace m3el {

void IclConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("ICL temperature tau must be > 0");
  if (!(beta >= 0.0)) throw ConfigError("ICL beta must be >= 0");
  if (!(gamma >= 0.0)) throw ConfigError("ICL gamma must be >= 0");
}

double cosine_sim(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ContractError("cosine_sim: dimension mismatch");
  const double nx = std::sqrt(dot(x, x));
  const double ny = std::sqrt(dot(y, y));
  return dot(x, y) / (nx * ny + kCosineEps);
}

NegativeSets negative_sets(std::size_t anchor, std::size_t u) {
  NegativeSets s;
  for (std::size_t j = 0; j < u; ++j) {
    if (j == anchor) continue;
    s.inner.push_back(j);
    s.inter.push_back(j);
  }
  return s;
}

double pair_loss(std::size_t i, const Tensor& anchors, const Tensor& positives, const IclConfig& cfg) {
  cfg.validate();
  if (!anchors.same_shape(positives)) throw ContractError("pair_loss: view shapes differ");
  if (i >= anchors.rows()) throw ContractError("pair_loss: anchor index out of range");
  auto logit = [&](const Tensor& m, std::size_t j) {
    return cosine_sim(anchors.row_span(i), m.row_span(j)) / cfg.tau;
  };
  const NegativeSets neg = negative_sets(i, anchors.rows());
  // log-sum-exp shifted by the largest logit that carries weight
  const double pos = logit(positives, i);
  double top = pos;
  if (cfg.beta > 0.0)
    for (std::size_t j : neg.inner) top = std::max(top, logit(anchors, j));
  if (cfg.gamma > 0.0)
    for (std::size_t j : neg.inter) top = std::max(top, logit(positives, j));
  double inner = 0.0, inter = 0.0;
  if (cfg.beta > 0.0)
    for (std::size_t j : neg.inner) inner += std::exp(logit(anchors, j) - top);
  if (cfg.gamma > 0.0)
    for (std::size_t j : neg.inter) inter += std::exp(logit(positives, j) - top);
  const double den = std::exp(pos - top) + cfg.beta * inner + cfg.gamma * inter;
  return std::log(den) + (top - pos);
}

ad::Var directional_cl_losses(ad::Graph& g, ad::Var anchors, ad::Var positives, const IclConfig& cfg) {
  cfg.validate();
  const Tensor& a = g.value(anchors);
  if (!a.same_shape(g.value(positives))) throw ContractError("ICL: view shapes differ");
  const std::size_t u = a.rows();

  Tensor off(u, u, 1.0);
  for (std::size_t i = 0; i < u; ++i) off(i, i) = 0.0;
  const ad::Var diag_c = g.constant(Tensor::identity(u));
  const ad::Var off_c = g.constant(off);

  const ad::Var cross = g.scale(g.cosine_matrix(anchors, positives, kCosineEps), 1.0 / cfg.tau);
  const ad::Var same = g.scale(g.cosine_matrix(anchors, anchors, kCosineEps), 1.0 / cfg.tau);

  // Per-row shift by the largest weighted logit. It is held constant: the
  // log-sum-exp gradient does not depend on the shift.
  const Tensor& cv = g.value(cross);
  const Tensor& sv = g.value(same);
  Tensor shift(u, 1);
  for (std::size_t i = 0; i < u; ++i) {
    double top = cv(i, i);
    for (std::size_t j = 0; j < u; ++j) {
      if (j == i) continue;
      if (cfg.beta > 0.0) top = std::max(top, sv(i, j));
      if (cfg.gamma > 0.0) top = std::max(top, cv(i, j));
    }
    shift(i, 0) = top;
  }
  Tensor shift_rows(u, u);
  for (std::size_t i = 0; i < u; ++i)
    for (std::size_t j = 0; j < u; ++j) shift_rows(i, j) = shift(i, 0);
  const ad::Var shift_c = g.constant(shift);
  const ad::Var shift_m = g.constant(shift_rows);

  // Entries that carry no weight are zeroed before exp so they cannot
  // overflow; their exp(0) = 1 is multiplied away below.
  Tensor cross_keep = Tensor::identity(u);
  Tensor same_keep(u, u);
  for (std::size_t i = 0; i < u; ++i)
    for (std::size_t j = 0; j < u; ++j) {
      if (j == i) continue;
      cross_keep(i, j) = cfg.gamma > 0.0 ? 1.0 : 0.0;
      same_keep(i, j) = cfg.beta > 0.0 ? 1.0 : 0.0;
    }
  const ad::Var cross_exp = g.exp(g.mul(g.sub(cross, shift_m), g.constant(cross_keep)));
  const ad::Var same_exp = g.exp(g.mul(g.sub(same, shift_m), g.constant(same_keep)));
  const ad::Var pos_logit = g.row_sum(g.mul(cross, diag_c));
  ad::Var den = g.row_sum(g.mul(cross_exp, diag_c));
  den = g.add(den, g.scale(g.row_sum(g.mul(same_exp, off_c)), cfg.beta));
  den = g.add(den, g.scale(g.row_sum(g.mul(cross_exp, off_c)), cfg.gamma));
  return g.add(g.log(den), g.sub(shift_c, pos_logit));
}

ad::Var total_cl_loss(ad::Graph& g, ad::Var text_entity, ad::Var text_mention, ad::Var vision_entity,
                      ad::Var vision_mention, const IclConfig& cfg) {
  const std::size_t u = g.value(text_entity).rows();
  for (ad::Var v : {text_mention, vision_entity, vision_mention}) {
    if (g.value(v).rows() != u) throw ContractError("ICL: batch sizes differ across views");
  }
  ad::Var all = directional_cl_losses(g, text_entity, text_mention, cfg);
  all = g.concat_rows(all, directional_cl_losses(g, text_mention, text_entity, cfg));
  all = g.concat_rows(all, directional_cl_losses(g, vision_entity, vision_mention, cfg));
  all = g.concat_rows(all, directional_cl_losses(g, vision_mention, vision_entity, cfg));
  return g.mean(all);
}

}  // namespace m3el
