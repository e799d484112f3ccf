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

#include "m3el/cmn.hpp"

#include "m3el/errors.hpp"

namespace m3el {

CmnParams add_cmn_params(ParamStore& store, const std::string& prefix, std::size_t global_dim,
                         std::size_t local_dim, std::size_t heads, std::mt19937_64& rng) {
  if (heads == 0) throw ConfigError("number of heads K must be >= 1");
  CmnParams p;
  p.global_proj = add_affine(store, prefix + ".global_proj", global_dim, global_dim, rng);
  p.local_proj = add_affine(store, prefix + ".local_proj", local_dim, global_dim, rng);
  for (std::size_t k = 0; k < heads; ++k) {
    p.head_logits.push_back(store.add(prefix + ".head_logit" + std::to_string(k), Tensor::scalar(0.0)));
  }
  return p;
}

Interaction bidirectional_interaction(ParamBinding& p, const CmnParams& params, ad::Var global,
                                      ad::Var locals, const Mask& mask) {
  ad::Graph& g = p.graph();
  Interaction it;
  it.projected_global = params.global_proj.apply(p, global);
  it.projected_locals = params.local_proj.apply(p, locals);
  it.global_to_local = g.row_softmax(g.matmul_nt(it.projected_global, it.projected_locals), mask);
  it.local_to_global = g.row_softmax(g.matmul_nt(it.projected_locals, it.projected_global));
  it.enhanced_global = g.relu(g.matmul(it.global_to_local, it.projected_locals));
  it.enhanced_locals = g.relu(g.matmul(it.local_to_global, it.projected_global));
  return it;
}

ad::Var multihead_fusion(ParamBinding& p, const CmnParams& params, ad::Var enhanced_locals,
                         ad::Var enhanced_global, const Mask& local_mask) {
  ad::Graph& g = p.graph();
  const ad::Var h = g.concat_rows(enhanced_locals, enhanced_global);
  Mask mask;
  if (!local_mask.empty()) {
    mask = local_mask;
    mask.push_back(1);
  }
  ad::Var total;
  for (ParamId logit : params.head_logits) {
    const ad::Var omega = g.exp(p(logit));
    const ad::Var weights = g.col_softmax(g.mul_scalar(omega, h), mask);
    const ad::Var head = g.col_sum(g.mul(weights, h));
    total = total.valid() ? g.add(total, head) : head;
  }
  return g.scale(total, 1.0 / static_cast<double>(params.heads()));
}

ad::Var gated_fusion(ad::Graph& g, ad::Var fused, ad::Var original_global) {
  if (!g.value(fused).same_shape(g.value(original_global))) {
    throw ConfigError("gated_fusion: fused width " + std::to_string(g.value(fused).cols()) +
                      " != global width " + std::to_string(g.value(original_global).cols()));
  }
  return g.add(fused, g.mul(g.tanh(original_global), original_global));
}

ad::Var direction_representation(ParamBinding& p, const CmnParams& params, ad::Var global,
                                 ad::Var locals, const Mask& mask) {
  const Interaction it = bidirectional_interaction(p, params, global, locals, mask);
  const ad::Var fused = multihead_fusion(p, params, it.enhanced_locals, it.enhanced_global, mask);
  return gated_fusion(p.graph(), fused, global);
}

ad::Var direction_score(ad::Graph& g, ad::Var entity_repr, ad::Var mention_repr) {
  if (g.value(entity_repr).cols() != g.value(mention_repr).cols()) {
    throw ContractError("direction_score: dim mismatch");
  }
  return g.dot(entity_repr, mention_repr);
}

}  // namespace m3el
