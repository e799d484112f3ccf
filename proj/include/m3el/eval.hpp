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

#include "json.hpp"

#include "m3el/feature_store.hpp"
#include "m3el/model.hpp"

namespace m3el {

struct Checkpoint;

// 1 + #(scores > gold) + #(other scores == gold): ties rank the gold last.
std::size_t rank_candidates(std::span<const double> scores, std::size_t gold);

struct EvalReport {
  std::string config_fingerprint;
  Split split = Split::kTest;
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits5 = 0.0;
  std::size_t n_mentions = 0;
  std::vector<std::size_t> ranks;

  bool operator==(const EvalReport&) const = default;
};

// MRR = mean(1 / rank), Hits@N = fraction of ranks <= N.
EvalReport compute_metrics(std::span<const std::size_t> ranks);

// {config_fingerprint, split, mrr, hits1, hits3, hits5, n_mentions}
nlohmann::ordered_json report_json(const EvalReport& r);

// Ranks every mention of `split` among its manifest candidates by M_U.
EvalReport evaluate_split(const ModelParams& params, const ScoreOptions& options, const Dataset& data,
                          Split split, const PadConfig& pad);
EvalReport evaluate_split(const Checkpoint& ckpt, const Dataset& data, Split split);

}  // namespace m3el
