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
#include <cstdint>
#include <optional>
#include <vector>

#include "m3el/autodiff.hpp"
#include "m3el/cmn.hpp"
#include "m3el/feature_store.hpp"
#include "m3el/imn.hpp"
#include "m3el/objective.hpp"
#include "m3el/params.hpp"

namespace m3el {

struct ModelDims {
  std::size_t text_dim = 512;          // d_t, must equal the text bank width
  std::size_t vision_dim = 96;         // d_v used inside the network
  std::size_t vision_input_dim = 96;   // vision bank width; != d_v adds a learned adapter
  std::size_t scaled_dim = 96;         // d_s
  std::size_t heads = 5;               // K

  void validate() const;
  bool operator==(const ModelDims&) const = default;
};

// All trainable parameters. Names in `store` are stable and used by
// checkpoints.
struct ModelParams {
  ModelDims dims;
  ParamStore store;
  std::optional<Affine> vision_adapter;
  ImnParams imn_text;
  ImnParams imn_vision;
  CmnParams t2v;  // global: text, locals: vision, d_c = d_t
  CmnParams v2t;  // global: vision, locals: text, d_c = d_v
};

// Xavier-uniform weights, zero biases, head logits 0 (omega = 1).
ModelParams init_model(const ModelDims& dims, std::uint64_t seed);

struct ScoreOptions {
  ScoreFlags scores;
  DirectionFlags directions;
  ad::Pooling pooling = ad::Pooling::kMean;
};

ScoreOptions score_options(const LossConfig& cfg);

struct EncodedEntity {
  ImnEntityView text;
  ImnEntityView vision;
  ad::Var t2v;  // direction representations; invalid when disabled
  ad::Var v2t;
};

struct EncodedMention {
  ImnMentionView text;
  ImnMentionView vision;
  ad::Var t2v;
  ad::Var v2t;
};

struct PairScores {
  ModalityScore text;
  ModalityScore vision;
  ad::Var t2v;
  ad::Var v2t;
  ad::Var cross;
  ad::Var uni;
};

// Plain values of one (mention, candidate) pair.
struct ScoreBundle {
  double m_t = 0.0, m_v = 0.0, m_c = 0.0, m_u = 0.0;
  double g2g_t = 0.0, g2l_t = 0.0, g2g_v = 0.0, g2l_v = 0.0;
  double t2v = 0.0, v2t = 0.0;
};

class Scorer {
 public:
  Scorer(ParamBinding& binding, const ModelParams& params, const ScoreOptions& options);

  EncodedEntity encode_entity(const ObjectFeatures& f);
  EncodedMention encode_mention(const ObjectFeatures& f);
  PairScores score(const EncodedEntity& e, const EncodedMention& m);
  ScoreBundle values(const PairScores& s) const;

  // Vision features after the optional adapter.
  ad::Var vision_input(ad::Var raw);

 private:
  ParamBinding& p_;
  const ModelParams& params_;
  ScoreOptions options_;
};

struct BatchForward {
  ScoreMatrices scores;  // u x u; row = mention, column = in-batch gold entity
  BatchGlobals globals;
  std::vector<std::size_t> gold;  // gold[i] = i
};

BatchForward forward_batch(ParamBinding& binding, const ModelParams& params, const Batch& batch,
                           const ScoreOptions& options);

// Scores of one mention against each of its candidates, in order.
std::vector<ScoreBundle> score_candidates(const ModelParams& params, const ObjectFeatures& mention,
                                          const std::vector<ObjectFeatures>& candidates,
                                          const ScoreOptions& options);

}  // namespace m3el
