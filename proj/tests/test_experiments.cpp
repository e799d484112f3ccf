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

#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "m3el/errors.hpp"
#include "m3el/experiments.hpp"

using namespace m3el;

namespace {

TrainConfig small(const SynthSpec& spec) {
  TrainConfig cfg = fixture::tiny_config(spec);
  cfg.max_steps = 3;
  return cfg;
}

}  // namespace

TEST_CASE("names parse both ways") {
  for (auto a : {AblationAxis::kLoss, AblationAxis::kModule, AblationAxis::kPooling, AblationAxis::kDirection})
    CHECK(parse_axis(axis_name(a)) == a);
  for (auto p : {SweepParam::kHeads, SweepParam::kTau, SweepParam::kBeta, SweepParam::kGamma})
    CHECK(parse_sweep_param(sweep_param_name(p)) == p);
  CHECK(parse_sweep_param("heads") == SweepParam::kHeads);
  CHECK_THROWS_AS(parse_axis("colour"), ConfigError);
  CHECK_THROWS_AS(parse_sweep_param("lr"), ConfigError);
  CHECK(default_variants(AblationAxis::kLoss).size() == 6);
  CHECK(default_variants(AblationAxis::kPooling) == std::vector<std::string>{"mean", "max", "soft"});
}

TEST_CASE("pooling ablation differs only in pooling") {
  const SynthSpec spec = fixture::tiny_spec();
  const Dataset d = generate_synthetic(spec, 3);
  const TrainConfig base = small(spec);
  const ExperimentTable t = run_ablation(base, d, AblationAxis::kPooling, {}, Split::kTrain);
  CHECK(t.kind == "ablation:pooling");
  REQUIRE(t.rows.size() == 3);
  std::set<std::string> prints;
  for (const auto& row : t.rows) {
    prints.insert(row.report.config_fingerprint);
    TrainConfig same = row.config;
    same.loss.pooling = base.loss.pooling;
    CHECK(serialize_config(same) == serialize_config(base));
    CHECK(row.log.size() == 3);
  }
  CHECK(prints.size() == 3);
  CHECK(t.rows[2].config.loss.pooling == ad::Pooling::kSoft);

  const auto j = table_json(t);
  CHECK(j["kind"] == "ablation:pooling");
  CHECK(j["rows"].size() == 3);
  CHECK(j["rows"][0]["label"] == "mean");
  CHECK(j["rows"][0].contains("mrr"));
  CHECK(j["rows"][0].contains("final_l_joint"));
  CHECK(table_text(t).find("soft") != std::string::npos);
}

TEST_CASE("ablation rows match a direct run") {
  const SynthSpec spec = fixture::tiny_spec();
  const Dataset d = generate_synthetic(spec, 3);
  const TrainConfig base = small(spec);
  const ExperimentTable t = run_ablation(base, d, AblationAxis::kLoss, {"no_l_cl"}, Split::kTrain);
  REQUIRE(t.rows.size() == 1);
  TrainConfig direct = base;
  direct.loss = apply_loss_variant(base.loss, "no_l_cl");
  const TrainResult r = train(direct, d);
  CHECK(t.rows[0].log == r.log);
  CHECK(t.rows[0].report == evaluate_split(r.best, d, Split::kTrain));
  CHECK_THROWS_AS(run_ablation(base, d, AblationAxis::kLoss, {"mean"}, Split::kTrain), ConfigError);
}

TEST_CASE("tau sweep") {
  const SynthSpec spec = fixture::tiny_spec();
  const Dataset d = generate_synthetic(spec, 3);
  const TrainConfig base = small(spec);
  const std::vector<double> taus{0.01, 0.03, 0.1, 0.3, 1.0};
  const ExperimentTable t = run_sweep(base, d, SweepParam::kTau, taus, Split::kTrain);
  CHECK(t.kind == "sweep:tau");
  REQUIRE(t.rows.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(t.rows[i].config.loss.icl.tau == taus[i]);

  const ExperimentTable k = run_sweep(base, d, SweepParam::kHeads, {1, 3}, Split::kTrain);
  CHECK(k.rows[1].config.dims.heads == 3);
}

TEST_CASE("invalid sweep values fail before training") {
  const SynthSpec spec = fixture::tiny_spec();
  const Dataset d = generate_synthetic(spec, 3);
  TrainConfig base = small(spec);
  base.max_steps = 1000000;  // would take ages if any training started
  CHECK_THROWS_AS(run_sweep(base, d, SweepParam::kTau, {0.1, 0.0}, Split::kTrain), ConfigError);
  CHECK_THROWS_AS(run_sweep(base, d, SweepParam::kHeads, {2, 1.5}, Split::kTrain), ConfigError);
  CHECK_THROWS_AS(run_sweep(base, d, SweepParam::kHeads, {0}, Split::kTrain), ConfigError);
  CHECK_THROWS_AS(run_sweep(base, d, SweepParam::kBeta, {-0.1}, Split::kTrain), ConfigError);
  CHECK_THROWS_AS(run_sweep(base, d, SweepParam::kGamma, {1, -2}, Split::kTrain), ConfigError);
}
