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
#include <filesystem>
#include <string>
#include <string_view>

#include "m3el/feature_store.hpp"
#include "m3el/model.hpp"
#include "m3el/objective.hpp"
#include "m3el/optim.hpp"

namespace m3el {

// Every knob of a training run. Defaults are the best grid values
// (lr 1e-5, bs 96, tau 0.03, K 5, beta 0.8, gamma 1.0).
struct TrainConfig {
  double lr = 1e-5;
  std::size_t batch_size = 96;
  std::size_t max_steps = 1000;
  // Validation cadence in steps; 0 means once per pass over the train split.
  std::size_t eval_every = 0;
  std::uint64_t seed = 42;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 5.0;  // global-norm clip; 0 disables
  ModelDims dims;
  PadConfig pad;
  double low_resource_fraction = 1.0;
  LossConfig loss;

  AdamWConfig adamw() const { return {lr, weight_decay, beta1, beta2, adam_eps}; }
  void validate() const;  // ConfigError
};

// Flat "key = value" text, one line per field, fixed key order. '#' starts
// a comment.
std::string serialize_config(const TrainConfig& cfg);

// Applies the keys present in `text` on top of `base`. Errors carry the
// line number.
TrainConfig parse_config(std::string_view text, const TrainConfig& base = {});
TrainConfig load_config(const std::filesystem::path& path, const TrainConfig& base = {});

// Sets one key from its textual value (ConfigError on unknown key or bad value).
void set_config_value(TrainConfig& cfg, std::string_view key, std::string_view value);

// 8 hex digits of the CRC-32 of serialize_config(cfg).
std::string config_fingerprint(const TrainConfig& cfg);

}  // namespace m3el
