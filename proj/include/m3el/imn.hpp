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
#include <span>
#include <string>

#include "m3el/autodiff.hpp"
#include "m3el/params.hpp"

namespace m3el {

// Intra-modal matching: global-to-global dot product plus a
// global-to-local attention score, one parameter set per modality.
struct ImnParams {
  Affine query;  // entity locals (and entity global) -> d_s
  Affine key;    // mention locals -> d_s
  Affine value;  // mention locals -> d_s

  std::size_t scaled_dim() const { return query.out; }
};

ImnParams add_imn_params(ParamStore& store, const std::string& prefix, std::size_t in_dim,
                         std::size_t scaled_dim, std::mt19937_64& rng);

double g2g_score(std::span<const double> entity_global, std::span<const double> mention_global);

// Entity-side projections, reusable across every mention it is scored against.
struct ImnEntityView {
  ad::Var global;          // raw global, 1 x d
  ad::Var query_global;    // query map applied to the global, 1 x d_s
  ad::Var queries;         // rows x d_s
  Mask mask;
};

struct ImnMentionView {
  ad::Var global;
  ad::Var keys;    // rows x d_s
  ad::Var values;  // rows x d_s
  Mask mask;
};

ImnEntityView imn_entity_view(ParamBinding& p, const ImnParams& params, ad::Var global,
                              ad::Var local, const Mask& mask);
ImnMentionView imn_mention_view(ParamBinding& p, const ImnParams& params, ad::Var global,
                                ad::Var local, const Mask& mask);

ad::Var g2g_score(ad::Graph& g, const ImnEntityView& e, const ImnMentionView& m);

// A = softmax(Q K^T / sqrt(d_s)) over unmasked mention rows,
// alpha = pool(A V) over unmasked entity rows, score = query(global) . alpha.
ad::Var g2l_score(ad::Graph& g, const ImnEntityView& e, const ImnMentionView& m, ad::Pooling pooling);

struct ModalityScore {
  ad::Var g2g;
  ad::Var g2l;
  ad::Var combined;  // (g2g + g2l) / 2
};

ModalityScore modality_match(ad::Graph& g, const ImnEntityView& e, const ImnMentionView& m,
                             ad::Pooling pooling);

}  // namespace m3el
