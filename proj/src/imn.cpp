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

#include "m3el/imn.hpp"

#include <cmath>

#include "m3el/errors.hpp"

namespace m3el {

ImnParams add_imn_params(ParamStore& store, const std::string& prefix, std::size_t in_dim,
                         std::size_t scaled_dim, std::mt19937_64& rng) {
  ImnParams p;
  p.query = add_affine(store, prefix + ".query", in_dim, scaled_dim, rng);
  p.key = add_affine(store, prefix + ".key", in_dim, scaled_dim, rng);
  p.value = add_affine(store, prefix + ".value", in_dim, scaled_dim, rng);
  return p;
}

double g2g_score(std::span<const double> entity_global, std::span<const double> mention_global) {
  if (entity_global.size() != mention_global.size()) throw ContractError("g2g_score: dim mismatch");
  return dot(entity_global, mention_global);
}

ImnEntityView imn_entity_view(ParamBinding& p, const ImnParams& params, ad::Var global,
                              ad::Var local, const Mask& mask) {
  return {global, params.query.apply(p, global), params.query.apply(p, local), mask};
}

ImnMentionView imn_mention_view(ParamBinding& p, const ImnParams& params, ad::Var global,
                                ad::Var local, const Mask& mask) {
  return {global, params.key.apply(p, local), params.value.apply(p, local), mask};
}

ad::Var g2g_score(ad::Graph& g, const ImnEntityView& e, const ImnMentionView& m) {
  return g.dot(e.global, m.global);
}

ad::Var g2l_score(ad::Graph& g, const ImnEntityView& e, const ImnMentionView& m, ad::Pooling pooling) {
  const double ds = static_cast<double>(g.value(e.queries).cols());
  const ad::Var logits = g.scale(g.matmul_nt(e.queries, m.keys), 1.0 / std::sqrt(ds));
  const ad::Var attn = g.row_softmax(logits, m.mask);
  const ad::Var alpha = g.pool_rows(g.matmul(attn, m.values), pooling, e.mask);
  return g.dot(e.query_global, alpha);
}

ModalityScore modality_match(ad::Graph& g, const ImnEntityView& e, const ImnMentionView& m,
                             ad::Pooling pooling) {
  ModalityScore s;
  s.g2g = g2g_score(g, e, m);
  s.g2l = g2l_score(g, e, m, pooling);
  s.combined = g.scale(g.add(s.g2g, s.g2l), 0.5);
  return s;
}

}  // namespace m3el
