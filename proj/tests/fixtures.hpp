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

// Small datasets and configs shared by several test binaries.

#include <cstdint>
#include <random>

#include "m3el/config.hpp"
#include "m3el/feature_store.hpp"
#include "m3el/grad_check.hpp"
#include "m3el/model.hpp"
#include "m3el/objective.hpp"

namespace fixture {

inline m3el::SynthSpec tiny_spec(std::size_t mentions = 12, std::size_t text_dim = 8, std::size_t vision_dim = 6) {
  m3el::SynthSpec s;
  s.num_entities = 2 * mentions;
  s.num_mentions = mentions;
  s.text_dim = text_dim;
  s.vision_dim = vision_dim;
  s.tokens = 5;
  s.patches = 3;
  s.sigma = 0.05;
  s.local_sigma = 0.3;
  s.distractors = 4;
  return s;
}

// A config sized for tiny synthetic data; trains in well under a second.
inline m3el::TrainConfig tiny_config(const m3el::SynthSpec& s) {
  m3el::TrainConfig c;
  c.lr = 1e-3;
  c.batch_size = 4;
  c.max_steps = 12;
  c.seed = 7;
  c.dims.text_dim = s.text_dim;
  c.dims.vision_dim = s.vision_dim;
  c.dims.vision_input_dim = s.vision_dim;
  c.dims.scaled_dim = 4;
  c.dims.heads = 2;
  c.pad.max_text_rows = s.tokens;
  c.pad.max_patch_rows = s.patches;
  c.loss.icl.tau = 0.1;
  return c;
}

// Perturbs every head logit and bias so nothing sits at its symmetric init.
inline void jitter(m3el::ModelParams& m, std::uint64_t seed, double scale = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  for (std::size_t i = 0; i < m.store.size(); ++i) {
    const auto& name = m.store.name(i);
    if (name.find("bias") != std::string::npos || name.find("head_logit") != std::string::npos) {
      for (auto& v : m.store.at(i).data()) v = n(rng);
    }
  }
}

// Full joint loss of one fixed batch, rebuilt from the parameters.
inline m3el::LossBuilder joint_loss_builder(const m3el::ModelParams& model, const m3el::Batch& batch,
                                            const m3el::LossConfig& cfg) {
  return [&model, &batch, cfg](m3el::ParamBinding& p) {
    const auto fwd = m3el::forward_batch(p, model, batch, m3el::score_options(cfg));
    return m3el::joint_loss(p.graph(), fwd.scores, fwd.globals, fwd.gold, cfg).total;
  };
}

}  // namespace fixture
