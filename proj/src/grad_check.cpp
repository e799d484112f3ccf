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

#include "m3el/grad_check.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "m3el/errors.hpp"

namespace m3el {
namespace {

constexpr double kNoiseUlps = 64.0;

struct Probe {
  double loss = 0.0;
  std::vector<std::int32_t> signature;
};

Probe evaluate(const LossBuilder& build, const ParamStore& params) {
  ad::Graph g;
  ParamBinding binding(g, params);
  const ad::Var loss = build(binding);
  const double v = g.value(loss).item();
  if (!std::isfinite(v)) throw NumericError("grad_check: non-finite loss while probing");
  return Probe{v, g.kink_signature()};
}

}  // namespace

GradCheckReport grad_check(const LossBuilder& build, ParamStore& params,
                           const GradCheckOptions& options) {
  const double h = options.h;
  if (!(h >= 1e-6 && h <= 1e-4)) throw ContractError("grad_check: step h must lie in [1e-6, 1e-4]");

  std::vector<Tensor> analytic;
  std::vector<std::int32_t> base_signature;
  {
    ad::Graph g;
    ParamBinding binding(g, params);
    const ad::Var loss = build(binding);
    analytic = binding.gradients(g.backward(loss));
    base_signature = g.kink_signature();
  }

  std::mt19937_64 rng(options.seed);
  GradCheckReport report;
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& p = params.at(t);
    std::vector<std::size_t> coords(p.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (options.max_coords_per_tensor > 0 && coords.size() > options.max_coords_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords_per_tensor);
    }
    for (std::size_t k : coords) {
      const double orig = p[k];

      p[k] = orig + 10.0 * h;
      const bool far_plus = evaluate(build, params).signature == base_signature;
      p[k] = orig - 10.0 * h;
      const bool far_minus = evaluate(build, params).signature == base_signature;
      if (!far_plus || !far_minus) {
        p[k] = orig;
        ++report.skipped;
        continue;
      }

      p[k] = orig + h;
      const double lp = evaluate(build, params).loss;
      p[k] = orig - h;
      const double lm = evaluate(build, params).loss;
      p[k] = orig;

      const double numeric = (lp - lm) / (2.0 * h);
      const double a = analytic[t][k];
      // Roundoff in a loss of this size, divided by 2h: a gradient smaller
      // than this cannot be resolved by differencing at all.
      const double floor = kNoiseUlps * std::numeric_limits<double>::epsilon() *
                           std::max({std::abs(lp), std::abs(lm), 1.0}) / (2.0 * h);
      if (std::abs(a) < floor && std::abs(numeric) < floor) {
        ++report.below_noise;
        continue;
      }
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      ++report.checked;
      if (err > report.max_rel_error || report.worst.empty()) {
        report.max_rel_error = std::max(err, report.max_rel_error);
        report.worst = params.name(t) + "[" + std::to_string(k) + "]";
      }
    }
  }
  return report;
}

}  // namespace m3el
