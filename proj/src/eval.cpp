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

#include "m3el/eval.hpp"

#include "m3el/checkpoint.hpp"
#include "m3el/config.hpp"
#include "m3el/errors.hpp"

namespace m3el {

std::size_t rank_candidates(std::span<const double> scores, std::size_t gold) {
  if (scores.empty()) throw ContractError("rank_candidates: no candidates");
  if (gold >= scores.size()) throw ContractError("rank_candidates: gold index out of range");
  const double g = scores[gold];
  std::size_t rank = 1;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (j != gold && scores[j] >= g) ++rank;
  }
  return rank;
}

EvalReport compute_metrics(std::span<const std::size_t> ranks) {
  if (ranks.empty()) throw ContractError("compute_metrics: no ranks");
  EvalReport r;
  r.n_mentions = ranks.size();
  r.ranks.assign(ranks.begin(), ranks.end());
  std::size_t h1 = 0, h3 = 0, h5 = 0;
  double rr = 0.0;
  for (std::size_t k : ranks) {
    if (k < 1) throw ContractError("compute_metrics: rank must be >= 1");
    rr += 1.0 / static_cast<double>(k);
    h1 += k <= 1;
    h3 += k <= 3;
    h5 += k <= 5;
  }
  const auto n = static_cast<double>(ranks.size());
  r.mrr = rr / n;
  r.hits1 = static_cast<double>(h1) / n;
  r.hits3 = static_cast<double>(h3) / n;
  r.hits5 = static_cast<double>(h5) / n;
  return r;
}

nlohmann::ordered_json report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["config_fingerprint"] = r.config_fingerprint;
  j["split"] = split_name(r.split);
  j["mrr"] = r.mrr;
  j["hits1"] = r.hits1;
  j["hits3"] = r.hits3;
  j["hits5"] = r.hits5;
  j["n_mentions"] = r.n_mentions;
  return j;
}

EvalReport evaluate_split(const ModelParams& params, const ScoreOptions& options, const Dataset& data,
                          Split split, const PadConfig& pad) {
  const Manifest entries = filter_split(data.manifest, split);
  if (entries.empty()) {
    throw DataError("split '" + std::string(split_name(split)) + "' has no mentions");
  }
  std::vector<std::uint64_t> missing;
  for (const auto& e : entries) {
    for (std::uint64_t c : e.candidates) {
      if (!data.entity_text.find(c) || !data.entity_vision.find(c)) missing.push_back(c);
    }
  }
  if (!missing.empty()) {
    std::string ids;
    for (std::size_t i = 0; i < missing.size(); ++i) ids += (i ? "," : "") + std::to_string(missing[i]);
    throw DataError("candidate embeddings missing for entity ids: " + ids);
  }

  std::vector<std::size_t> ranks;
  ranks.reserve(entries.size());
  for (const auto& e : entries) {
    const ObjectFeatures mention = mention_features(data, e.mention_id, pad);
    std::vector<ObjectFeatures> cands;
    std::size_t gold = e.candidates.size();
    for (std::size_t j = 0; j < e.candidates.size(); ++j) {
      if (e.candidates[j] == e.gold_entity_id) gold = j;
      cands.push_back(entity_features(data, e.candidates[j], pad));
    }
    if (gold == e.candidates.size()) {
      throw DataError("mention " + std::to_string(e.mention_id) + ": gold entity " +
                      std::to_string(e.gold_entity_id) + " not among candidates");
    }
    const auto bundles = score_candidates(params, mention, cands, options);
    std::vector<double> scores;
    scores.reserve(bundles.size());
    for (const auto& b : bundles) scores.push_back(b.m_u);
    ranks.push_back(rank_candidates(scores, gold));
  }
  EvalReport r = compute_metrics(ranks);
  r.split = split;
  return r;
}

EvalReport evaluate_split(const Checkpoint& ckpt, const Dataset& data, Split split) {
  const ModelDims& d = ckpt.params.dims;
  if (data.text_dim() != d.text_dim || data.vision_dim() != d.vision_input_dim) {
    throw DataError("checkpoint expects text/vision widths " + std::to_string(d.text_dim) + "/" +
                    std::to_string(d.vision_input_dim) + " but banks have " +
                    std::to_string(data.text_dim()) + "/" + std::to_string(data.vision_dim()));
  }
  EvalReport r = evaluate_split(ckpt.params, score_options(ckpt.config.loss), data, split, ckpt.config.pad);
  r.config_fingerprint = config_fingerprint(ckpt.config);
  return r;
}

}  // namespace m3el
