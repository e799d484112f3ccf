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

#include "m3el/model.hpp"

#include <random>

#include "m3el/errors.hpp"

namespace m3el {
namespace {

ad::Var stack_rows(ad::Graph& g, const std::vector<const Tensor*>& rows) {
  const std::size_t cols = rows.front()->cols();
  Tensor t(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < cols; ++c) t(i, c) = (*rows[i])(0, c);
  return g.constant(std::move(t));
}

}  // namespace

void ModelDims::validate() const {
  if (text_dim == 0 || vision_dim == 0 || vision_input_dim == 0 || scaled_dim == 0) {
    throw ConfigError("model dims must be positive");
  }
  if (heads == 0) throw ConfigError("number of heads K must be >= 1");
}

ModelParams init_model(const ModelDims& dims, std::uint64_t seed) {
  dims.validate();
  std::mt19937_64 rng(seed);
  ModelParams m;
  m.dims = dims;
  if (dims.vision_input_dim != dims.vision_dim) {
    m.vision_adapter = add_affine(m.store, "vision_adapter", dims.vision_input_dim, dims.vision_dim, rng);
  }
  m.imn_text = add_imn_params(m.store, "imn.text", dims.text_dim, dims.scaled_dim, rng);
  m.imn_vision = add_imn_params(m.store, "imn.vision", dims.vision_dim, dims.scaled_dim, rng);
  m.t2v = add_cmn_params(m.store, "cmn.t2v", dims.text_dim, dims.vision_dim, dims.heads, rng);
  m.v2t = add_cmn_params(m.store, "cmn.v2t", dims.vision_dim, dims.text_dim, dims.heads, rng);
  return m;
}

ScoreOptions score_options(const LossConfig& cfg) {
  return ScoreOptions{cfg.scores, cfg.directions, cfg.pooling};
}

Scorer::Scorer(ParamBinding& binding, const ModelParams& params, const ScoreOptions& options)
    : p_(binding), params_(params), options_(options) {}

ad::Var Scorer::vision_input(ad::Var raw) {
  if (p_.graph().value(raw).cols() != params_.dims.vision_input_dim) {
    throw DataError("vision feature width " + std::to_string(p_.graph().value(raw).cols()) +
                    " != configured vision input dim " + std::to_string(params_.dims.vision_input_dim));
  }
  return params_.vision_adapter ? params_.vision_adapter->apply(p_, raw) : raw;
}

EncodedEntity Scorer::encode_entity(const ObjectFeatures& f) {
  ad::Graph& g = p_.graph();
  if (f.text.global.cols() != params_.dims.text_dim) {
    throw DataError("text feature width " + std::to_string(f.text.global.cols()) +
                    " != configured d_t " + std::to_string(params_.dims.text_dim));
  }
  const ad::Var tg = g.constant(f.text.global);
  const ad::Var tl = g.constant(f.text.local);
  const ad::Var vg = vision_input(g.constant(f.vision.global));
  const ad::Var vl = vision_input(g.constant(f.vision.local));
  EncodedEntity e;
  e.text = imn_entity_view(p_, params_.imn_text, tg, tl, f.text.mask);
  e.vision = imn_entity_view(p_, params_.imn_vision, vg, vl, f.vision.mask);
  if (options_.scores.cross && options_.directions.t2v) {
    e.t2v = direction_representation(p_, params_.t2v, tg, vl, f.vision.mask);
  }
  if (options_.scores.cross && options_.directions.v2t) {
    e.v2t = direction_representation(p_, params_.v2t, vg, tl, f.text.mask);
  }
  return e;
}

EncodedMention Scorer::encode_mention(const ObjectFeatures& f) {
  ad::Graph& g = p_.graph();
  if (f.text.global.cols() != params_.dims.text_dim) {
    throw DataError("text feature width " + std::to_string(f.text.global.cols()) +
                    " != configured d_t " + std::to_string(params_.dims.text_dim));
  }
  const ad::Var tg = g.constant(f.text.global);
  const ad::Var tl = g.constant(f.text.local);
  const ad::Var vg = vision_input(g.constant(f.vision.global));
  const ad::Var vl = vision_input(g.constant(f.vision.local));
  EncodedMention m;
  m.text = imn_mention_view(p_, params_.imn_text, tg, tl, f.text.mask);
  m.vision = imn_mention_view(p_, params_.imn_vision, vg, vl, f.vision.mask);
  if (options_.scores.cross && options_.directions.t2v) {
    m.t2v = direction_representation(p_, params_.t2v, tg, vl, f.vision.mask);
  }
  if (options_.scores.cross && options_.directions.v2t) {
    m.v2t = direction_representation(p_, params_.v2t, vg, tl, f.text.mask);
  }
  return m;
}

PairScores Scorer::score(const EncodedEntity& e, const EncodedMention& m) {
  ad::Graph& g = p_.graph();
  PairScores s;
  if (options_.scores.text) s.text = modality_match(g, e.text, m.text, options_.pooling);
  if (options_.scores.vision) s.vision = modality_match(g, e.vision, m.vision, options_.pooling);
  if (options_.scores.cross) {
    if (options_.directions.t2v) s.t2v = direction_score(g, e.t2v, m.t2v);
    if (options_.directions.v2t) s.v2t = direction_score(g, e.v2t, m.v2t);
    if (s.t2v.valid() && s.v2t.valid()) {
      s.cross = g.scale(g.add(s.t2v, s.v2t), 0.5);
    } else if (s.t2v.valid() || s.v2t.valid()) {
      s.cross = s.t2v.valid() ? s.t2v : s.v2t;
    } else {
      throw ConfigError("cross-modal score needs at least one direction enabled");
    }
  }
  s.uni = union_score(g, s.text.combined, s.vision.combined, s.cross, options_.scores);
  return s;
}

ScoreBundle Scorer::values(const PairScores& s) const {
  const ad::Graph& g = p_.graph();
  auto val = [&](ad::Var v) { return v.valid() ? g.value(v).item() : 0.0; };
  ScoreBundle b;
  b.m_t = val(s.text.combined);
  b.g2g_t = val(s.text.g2g);
  b.g2l_t = val(s.text.g2l);
  b.m_v = val(s.vision.combined);
  b.g2g_v = val(s.vision.g2g);
  b.g2l_v = val(s.vision.g2l);
  b.t2v = val(s.t2v);
  b.v2t = val(s.v2t);
  b.m_c = val(s.cross);
  b.m_u = val(s.uni);
  return b;
}

BatchForward forward_batch(ParamBinding& binding, const ModelParams& params, const Batch& batch,
                           const ScoreOptions& options) {
  const std::size_t u = batch.size();
  if (u == 0) throw ContractError("forward_batch: empty batch");
  ad::Graph& g = binding.graph();
  Scorer scorer(binding, params, options);

  std::vector<EncodedEntity> ents;
  std::vector<EncodedMention> ments;
  ents.reserve(u);
  ments.reserve(u);
  for (std::size_t i = 0; i < u; ++i) ents.push_back(scorer.encode_entity(batch.entities[i]));
  for (std::size_t i = 0; i < u; ++i) ments.push_back(scorer.encode_mention(batch.mentions[i]));

  std::vector<ad::Var> text, vision, cross, uni;
  for (std::size_t i = 0; i < u; ++i) {
    for (std::size_t j = 0; j < u; ++j) {
      const PairScores s = scorer.score(ents[j], ments[i]);
      if (options.scores.text) text.push_back(s.text.combined);
      if (options.scores.vision) vision.push_back(s.vision.combined);
      if (options.scores.cross) cross.push_back(s.cross);
      uni.push_back(s.uni);
    }
  }

  BatchForward out;
  if (options.scores.text) out.scores.text = g.stack(text, u, u);
  if (options.scores.vision) out.scores.vision = g.stack(vision, u, u);
  if (options.scores.cross) out.scores.cross = g.stack(cross, u, u);
  out.scores.uni = g.stack(uni, u, u);

  std::vector<const Tensor*> te, tm, ve, vm;
  for (std::size_t i = 0; i < u; ++i) {
    te.push_back(&batch.entities[i].text.global);
    tm.push_back(&batch.mentions[i].text.global);
    ve.push_back(&batch.entities[i].vision.global);
    vm.push_back(&batch.mentions[i].vision.global);
  }
  out.globals.text_entity = stack_rows(g, te);
  out.globals.text_mention = stack_rows(g, tm);
  out.globals.vision_entity = scorer.vision_input(stack_rows(g, ve));
  out.globals.vision_mention = scorer.vision_input(stack_rows(g, vm));
  out.gold.resize(u);
  for (std::size_t i = 0; i < u; ++i) out.gold[i] = i;
  return out;
}

std::vector<ScoreBundle> score_candidates(const ModelParams& params, const ObjectFeatures& mention,
                                          const std::vector<ObjectFeatures>& candidates,
                                          const ScoreOptions& options) {
  ad::Graph g;
  ParamBinding binding(g, params.store);
  Scorer scorer(binding, params, options);
  const EncodedMention m = scorer.encode_mention(mention);
  std::vector<ScoreBundle> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) out.push_back(scorer.values(scorer.score(scorer.encode_entity(c), m)));
  return out;
}

}  // namespace m3el
