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
#include <filesystem>
#include <span>
#include <vector>

#include "m3el/config.hpp"
#include "m3el/model.hpp"
#include "m3el/optim.hpp"

namespace m3el {

struct Checkpoint {
  TrainConfig config;
  ModelParams params;
  OptimizerState optimizer;
  std::uint64_t step = 0;
};

inline constexpr char kCheckpointMagic[4] = {'M', '3', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Little-endian layout:
//   "M3CK" u32 version u32 config_len config_text u64 step
//   u32 n_params, per param: u32 name_len name u32 rows u32 cols f64[rows*cols]
//   u64 optimizer_step, per param: f64[] first moment, f64[] second moment
//   u32 crc32 of every preceding byte
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace m3el
