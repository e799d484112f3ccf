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
#include <string>
#include <vector>

#include "m3el/autodiff.hpp"
#include "m3el/cmn.hpp"
#include "m3el/icl.hpp"
#include "m3el/tensor.hpp"

namespace m3el {

// Which scores enter the union score and which losses enter the joint
// objective. A loss on a disabled score is forced off.
struct ScoreFlags {
  bool text = true;    // M_T
  bool vision = true;  // M_V
  bool cross = true;   // M_C
};

struct LossFlags {
  bool cl = true;
  bool uni = true;
  bool text = true;
  bool vision = true;
  bool cross = true;
};

struct LossConfig {
  LossFlags losses;
  ScoreFlags scores;
  IclConfig icl;
  ad::Pooling pooling = ad::Pooling::kMean;
  DirectionFlags directions;

  // Throws ConfigError when no score or no loss is enabled, or a loss is
  // enabled on a disabled score.
  void validate() const;
};

struct LossBreakdown {
  double l_cl = 0.0;
  double l_u = 0.0;
  double l_t = 0.0;
  double l_v = 0.0;
  double l_c = 0.0;
  double l_joint = 0.0;

  bool operator==(const LossBreakdown&) const = default;
};

// Mean softmax cross-entropy of the gold column of each row.
double uco_loss(const Tensor& scores, std::span<const std::size_t> gold);
ad::Var uco_loss(ad::Graph& g, ad::Var scores, std::span<const std::size_t> gold);

// Mean of the enabled scores; ConfigError if none is enabled.
double union_score(double m_t, double m_v, double m_c, const ScoreFlags& enabled);
ad::Var union_score(ad::Graph& g, ad::Var m_t, ad::Var m_v, ad::Var m_c, const ScoreFlags& enabled);

// u x c score matrices for one batch; disabled entries are invalid vars.
struct ScoreMatrices {
  ad::Var text;
  ad::Var vision;
  ad::Var cross;
  ad::Var uni;
};

// Batch global features for the contrastive term (u x d each).
struct BatchGlobals {
  ad::Var text_entity;
  ad::Var text_mention;
  ad::Var vision_entity;
  ad::Var vision_mention;
};

struct JointLoss {
  ad::Var total;
  LossBreakdown breakdown;  // components report their value even when disabled
};

JointLoss joint_loss(ad::Graph& g, const ScoreMatrices& scores, const BatchGlobals& globals,
                     std::span<const std::size_t> gold, const LossConfig& cfg);

// Ablation variant names understood by apply_loss_variant:
//   full, no_l_u, no_l_t, no_l_v, no_l_c, no_l_cl,
//   no_text_module, no_vision_module, no_cross_module,
//   t2v_only, v2t_only, t2v_v2t
LossConfig apply_loss_variant(LossConfig base, const std::string& variant);

}  // namespace m3el
