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
#include <functional>
#include <string>

#include "m3el/autodiff.hpp"
#include "m3el/params.hpp"

namespace m3el {

// Builds a scalar loss from parameters bound into a fresh graph.
using LossBuilder = std::function<ad::Var(ParamBinding&)>;

struct GradCheckOptions {
  double h = 1e-5;
  // 0 checks every coordinate; otherwise a seeded sample per tensor.
  std::size_t max_coords_per_tensor = 0;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  // Coordinates within 10h of a relu/max kink; finite differences are
  // meaningless there.
  std::size_t skipped = 0;
  // Coordinates where both gradients are below the roundoff floor of the
  // difference quotient (64 ulp of the loss over 2h), e.g. a key bias that
  // a softmax cancels exactly. Relative error means nothing there.
  std::size_t below_noise = 0;
  std::string worst;  // "<param>[index]" of the largest error
};

// Central differences against backward(); relative error is
// |a - n| / max(|a|, |n|, 1e-8). Throws NumericError if any probe is
// non-finite.
GradCheckReport grad_check(const LossBuilder& build, ParamStore& params,
                           const GradCheckOptions& options = {});

}  // namespace m3el
