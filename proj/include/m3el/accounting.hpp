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
#include <string>
#include <utility>
#include <vector>

#include "m3el/feature_store.hpp"
#include "m3el/model.hpp"

namespace m3el {

struct ParamCount {
  // Grouped by top-level prefix: vision_adapter, imn.text, imn.vision,
  // cmn.t2v, cmn.v2t.
  std::vector<std::pair<std::string, std::size_t>> components;
  std::size_t total = 0;
};

ParamCount count_params(const ModelParams& params);

// Forward scoring workload: `mentions` mentions each ranked against
// `candidates` entities. Entity-side work is counted once per pair.
struct FlopShape {
  std::size_t mentions = 1;
  std::size_t candidates = 1;
};

// Analytic forward FLOPs of the scoring graph at the padded row counts.
// Cost model:
//   matmul (m x k)(k x n)    2mkn
//   affine on r rows         2 r in out + r out
//   softmax over n entries   3n   (exp, sum, divide)
//   elementwise op / relu / tanh / scale   1 per entry
//   dot of length n          2n
//   mean pool of r x c       r c + c
//   column sum of r x c      r c
std::uint64_t estimate_flops(const ModelDims& dims, const PadConfig& pad, const ScoreOptions& options,
                             const FlopShape& shape);

std::uint64_t matmul_flops(std::uint64_t m, std::uint64_t k, std::uint64_t n);

}  // namespace m3el
