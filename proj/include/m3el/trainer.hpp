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

#include <cstdint>
#include <optional>
#include <vector>

#include "json.hpp"

#include "m3el/checkpoint.hpp"
#include "m3el/config.hpp"
#include "m3el/eval.hpp"
#include "m3el/feature_store.hpp"
#include "m3el/objective.hpp"

namespace m3el {

struct StepLog {
  std::uint64_t step = 0;  // 1-based optimizer step
  LossBreakdown loss;
  double grad_norm = 0.0;  // before clipping

  bool operator==(const StepLog&) const = default;
};

struct ValidationPoint {
  std::uint64_t step = 0;
  double mrr = 0.0;
};

struct TrainResult {
  Checkpoint best;  // highest validation MRR; the last state if there is no valid split
  Checkpoint last;
  std::vector<StepLog> log;
  std::vector<ValidationPoint> validation;
};

// Minimizes the joint loss with AdamW on in-batch candidates. Batches are
// drawn from a generator seeded by (seed, step), so a run resumed from a
// checkpoint replays the same batches as an uninterrupted one.
TrainResult train(const TrainConfig& config, const Dataset& data,
                  const std::optional<Checkpoint>& resume = std::nullopt);

nlohmann::ordered_json loss_log_json(const std::vector<StepLog>& log);

}  // namespace m3el
