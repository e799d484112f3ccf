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
#include <random>
#include <string>
#include <vector>

#include "m3el/autodiff.hpp"
#include "m3el/params.hpp"

namespace m3el {

// Cross-modal matching for one direction. T2V pairs the text global with
// vision locals; V2T the vision global with text locals. The same weights
// serve the entity and the mention level.
struct CmnParams {
  Affine global_proj;  // global dim -> d_c
  Affine local_proj;   // local dim -> d_c
  // omega_k = exp(head_logits[k]) > 0.
  std::vector<ParamId> head_logits;

  std::size_t fused_dim() const { return global_proj.out; }
  std::size_t heads() const { return head_logits.size(); }
};

// d_c equals global_dim so the tanh gate is well-typed.
CmnParams add_cmn_params(ParamStore& store, const std::string& prefix, std::size_t global_dim,
                         std::size_t local_dim, std::size_t heads, std::mt19937_64& rng);

struct DirectionFlags {
  bool t2v = true;
  bool v2t = true;
};

struct Interaction {
  ad::Var projected_global;  // 1 x d_c
  ad::Var projected_locals;  // rows x d_c
  ad::Var global_to_local;   // 1 x rows attention
  ad::Var local_to_global;   // rows x 1, identically 1 (softmax over one column)
  ad::Var enhanced_global;   // relu(global_to_local * projected_locals)
  ad::Var enhanced_locals;   // relu(local_to_global * projected_global)
};

Interaction bidirectional_interaction(ParamBinding& p, const CmnParams& params, ad::Var global,
                                      ad::Var locals, const Mask& mask);

// h = [enhanced_locals; enhanced_global]. Head k softmaxes omega_k * h down
// each column over unmasked rows and takes the weighted column sum; the
// result is the mean over heads.
ad::Var multihead_fusion(ParamBinding& p, const CmnParams& params, ad::Var enhanced_locals,
                         ad::Var enhanced_global, const Mask& local_mask);

// fused + tanh(global) * global. ConfigError when widths differ.
ad::Var gated_fusion(ad::Graph& g, ad::Var fused, ad::Var original_global);

// Full per-object pipeline for one direction.
ad::Var direction_representation(ParamBinding& p, const CmnParams& params, ad::Var global,
                                 ad::Var locals, const Mask& mask);

ad::Var direction_score(ad::Graph& g, ad::Var entity_repr, ad::Var mention_repr);

}  // namespace m3el
