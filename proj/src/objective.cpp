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

#include "m3el/objective.hpp"

#include "m3el/errors.hpp"

namespace m3el {

void LossConfig::validate() const {
  icl.validate();
  if (!scores.text && !scores.vision && !scores.cross) {
    throw ConfigError("at least one of M_T, M_V, M_C must be enabled");
  }
  if (!losses.cl && !losses.uni && !losses.text && !losses.vision && !losses.cross) {
    throw ConfigError("at least one loss component must be enabled");
  }
  if ((losses.text && !scores.text) || (losses.vision && !scores.vision) ||
      (losses.cross && !scores.cross)) {
    throw ConfigError("a loss is enabled on a disabled score");
  }
  if (scores.cross && !directions.t2v && !directions.v2t) {
    throw ConfigError("cross-modal score needs at least one of T2V, V2T");
  }
}

double uco_loss(const Tensor& scores, std::span<const std::size_t> gold) {
  ad::Graph g;
  const ad::Var s = g.constant(scores);
  return g.value(uco_loss(g, s, gold)).item();
}

ad::Var uco_loss(ad::Graph& g, ad::Var scores, std::span<const std::size_t> gold) {
  return g.softmax_cross_entropy(scores, std::vector<std::size_t>(gold.begin(), gold.end()));
}

double union_score(double m_t, double m_v, double m_c, const ScoreFlags& enabled) {
  double sum = 0.0;
  int n = 0;
  if (enabled.text) sum += m_t, ++n;
  if (enabled.vision) sum += m_v, ++n;
  if (enabled.cross) sum += m_c, ++n;
  if (n == 0) throw ConfigError("union_score: no score enabled");
  return sum / n;
}

ad::Var union_score(ad::Graph& g, ad::Var m_t, ad::Var m_v, ad::Var m_c, const ScoreFlags& enabled) {
  ad::Var sum;
  int n = 0;
  auto take = [&](bool on, ad::Var v) {
    if (!on) return;
    sum = sum.valid() ? g.add(sum, v) : v;
    ++n;
  };
  take(enabled.text, m_t);
  take(enabled.vision, m_v);
  take(enabled.cross, m_c);
  if (n == 0) throw ConfigError("union_score: no score enabled");
  return g.scale(sum, 1.0 / n);
}

JointLoss joint_loss(ad::Graph& g, const ScoreMatrices& scores, const BatchGlobals& globals,
                     std::span<const std::size_t> gold, const LossConfig& cfg) {
  cfg.validate();
  JointLoss out;
  ad::Var total;
  auto add_term = [&](bool enabled, ad::Var term, double& slot) {
    slot = g.value(term).item();
    if (enabled) total = total.valid() ? g.add(total, term) : term;
  };

  add_term(cfg.losses.cl,
           total_cl_loss(g, globals.text_entity, globals.text_mention, globals.vision_entity,
                         globals.vision_mention, cfg.icl),
           out.breakdown.l_cl);
  add_term(cfg.losses.uni, uco_loss(g, scores.uni, gold), out.breakdown.l_u);
  if (cfg.scores.text) add_term(cfg.losses.text, uco_loss(g, scores.text, gold), out.breakdown.l_t);
  if (cfg.scores.vision) {
    add_term(cfg.losses.vision, uco_loss(g, scores.vision, gold), out.breakdown.l_v);
  }
  if (cfg.scores.cross) add_term(cfg.losses.cross, uco_loss(g, scores.cross, gold), out.breakdown.l_c);

  out.total = total;
  const LossBreakdown& b = out.breakdown;
  out.breakdown.l_joint = (cfg.losses.cl ? b.l_cl : 0.0) + (cfg.losses.uni ? b.l_u : 0.0) +
                          (cfg.losses.text ? b.l_t : 0.0) + (cfg.losses.vision ? b.l_v : 0.0) +
                          (cfg.losses.cross ? b.l_c : 0.0);
  return out;
}

LossConfig apply_loss_variant(LossConfig c, const std::string& v) {
  if (v == "full") {
  } else if (v == "no_l_u") {
    c.losses.uni = false;
  } else if (v == "no_l_t") {
    c.losses.text = false;
  } else if (v == "no_l_v") {
    c.losses.vision = false;
  } else if (v == "no_l_c") {
    c.losses.cross = false;
  } else if (v == "no_l_cl") {
    c.losses.cl = false;
  } else if (v == "no_text_module") {
    c.losses.text = false;
    c.scores.text = false;
  } else if (v == "no_vision_module") {
    c.losses.vision = false;
    c.scores.vision = false;
  } else if (v == "no_cross_module") {
    c.losses.cross = false;
    c.scores.cross = false;
  } else if (v == "t2v_only") {
    c.directions = {true, false};
  } else if (v == "v2t_only") {
    c.directions = {false, true};
  } else if (v == "t2v_v2t") {
    c.directions = {true, true};
  } else {
    throw ConfigError("unknown ablation variant '" + v + "'");
  }
  c.validate();
  return c;
}

}  // namespace m3el
