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

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "m3el/config.hpp"
#include "m3el/eval.hpp"
#include "m3el/feature_store.hpp"
#include "m3el/trainer.hpp"

namespace m3el {

enum class AblationAxis { kLoss, kModule, kPooling, kDirection };
enum class SweepParam { kHeads, kTau, kBeta, kGamma };

AblationAxis parse_axis(std::string_view s);
std::string_view axis_name(AblationAxis a);
SweepParam parse_sweep_param(std::string_view s);  // "K"/"heads", "tau", "beta", "gamma"
std::string_view sweep_param_name(SweepParam p);

// loss:      full no_l_u no_l_t no_l_v no_l_c no_l_cl
// module:    full no_text_module no_vision_module no_cross_module
// pooling:   mean max soft
// direction: t2v_only v2t_only t2v_v2t
std::vector<std::string> default_variants(AblationAxis axis);

// Config of one ablation variant; ConfigError if it does not belong to the axis.
TrainConfig ablation_config(const TrainConfig& base, AblationAxis axis, const std::string& variant);

// Config of one sweep point; ConfigError for values outside the domain
// (tau > 0, K >= 1 integral, beta/gamma >= 0).
TrainConfig sweep_config(const TrainConfig& base, SweepParam param, double value);

struct ExperimentRow {
  std::string label;
  TrainConfig config;
  EvalReport report;
  std::vector<StepLog> log;
};

struct ExperimentTable {
  std::string kind;  // "ablation:<axis>" or "sweep:<param>"
  std::vector<ExperimentRow> rows;
};

// Every variant is trained from the same seed on the same data, then scored
// on `eval_split`. All variants are validated before any training starts.
ExperimentTable run_ablation(const TrainConfig& base, const Dataset& data, AblationAxis axis,
                             std::vector<std::string> variants, Split eval_split);
ExperimentTable run_sweep(const TrainConfig& base, const Dataset& data, SweepParam param,
                          const std::vector<double>& values, Split eval_split);

nlohmann::ordered_json table_json(const ExperimentTable& table);
// Fixed-width text with metrics scaled by 100.
std::string table_text(const ExperimentTable& table);

}  // namespace m3el
