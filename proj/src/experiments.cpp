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

#include "m3el/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <algorithm>

#include "m3el/errors.hpp"

namespace m3el {

AblationAxis parse_axis(std::string_view s) {
  if (s == "loss") return AblationAxis::kLoss;
  if (s == "module") return AblationAxis::kModule;
  if (s == "pooling") return AblationAxis::kPooling;
  if (s == "direction") return AblationAxis::kDirection;
  throw ConfigError("unknown ablation axis '" + std::string(s) + "' (loss|module|pooling|direction)");
}

std::string_view axis_name(AblationAxis a) {
  switch (a) {
    case AblationAxis::kLoss: return "loss";
    case AblationAxis::kModule: return "module";
    case AblationAxis::kPooling: return "pooling";
    case AblationAxis::kDirection: return "direction";
  }
  return "?";
}

SweepParam parse_sweep_param(std::string_view s) {
  if (s == "K" || s == "k" || s == "heads") return SweepParam::kHeads;
  if (s == "tau") return SweepParam::kTau;
  if (s == "beta") return SweepParam::kBeta;
  if (s == "gamma") return SweepParam::kGamma;
  throw ConfigError("unknown sweep parameter '" + std::string(s) + "' (K|tau|beta|gamma)");
}

std::string_view sweep_param_name(SweepParam p) {
  switch (p) {
    case SweepParam::kHeads: return "K";
    case SweepParam::kTau: return "tau";
    case SweepParam::kBeta: return "beta";
    case SweepParam::kGamma: return "gamma";
  }
  return "?";
}

std::vector<std::string> default_variants(AblationAxis axis) {
  switch (axis) {
    case AblationAxis::kLoss: return {"full", "no_l_u", "no_l_t", "no_l_v", "no_l_c", "no_l_cl"};
    case AblationAxis::kModule: return {"full", "no_text_module", "no_vision_module", "no_cross_module"};
    case AblationAxis::kPooling: return {"mean", "max", "soft"};
    case AblationAxis::kDirection: return {"t2v_only", "v2t_only", "t2v_v2t"};
  }
  return {};
}

TrainConfig ablation_config(const TrainConfig& base, AblationAxis axis, const std::string& variant) {
  const auto allowed = default_variants(axis);
  if (std::find(allowed.begin(), allowed.end(), variant) == allowed.end()) {
    throw ConfigError("variant '" + variant + "' is not on the " + std::string(axis_name(axis)) + " axis");
  }
  TrainConfig c = base;
  if (axis == AblationAxis::kPooling) {
    c.loss.pooling = ad::parse_pooling(variant);
  } else {
    c.loss = apply_loss_variant(base.loss, variant);
  }
  c.validate();
  return c;
}

TrainConfig sweep_config(const TrainConfig& base, SweepParam param, double value) {
  TrainConfig c = base;
  switch (param) {
    case SweepParam::kHeads:
      if (!(value >= 1.0) || std::floor(value) != value) {
        throw ConfigError("K must be an integer >= 1");
      }
      c.dims.heads = static_cast<std::size_t>(value);
      break;
    case SweepParam::kTau:
      if (!(value > 0.0)) throw ConfigError("tau must be > 0");
      c.loss.icl.tau = value;
      break;
    case SweepParam::kBeta:
      if (!(value >= 0.0)) throw ConfigError("beta must be >= 0");
      c.loss.icl.beta = value;
      break;
    case SweepParam::kGamma:
      if (!(value >= 0.0)) throw ConfigError("gamma must be >= 0");
      c.loss.icl.gamma = value;
      break;
  }
  c.validate();
  return c;
}

namespace {

ExperimentRow run_one(const std::string& label, const TrainConfig& cfg, const Dataset& data, Split split) {
  TrainResult tr = train(cfg, data);
  ExperimentRow row;
  row.label = label;
  row.config = cfg;
  row.report = evaluate_split(tr.best, data, split);
  row.log = std::move(tr.log);
  return row;
}

std::string fmt_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

ExperimentTable run_ablation(const TrainConfig& base, const Dataset& data, AblationAxis axis,
                             std::vector<std::string> variants, Split eval_split) {
  if (variants.empty()) variants = default_variants(axis);
  std::vector<TrainConfig> configs;
  for (const auto& v : variants) configs.push_back(ablation_config(base, axis, v));

  ExperimentTable t;
  t.kind = "ablation:" + std::string(axis_name(axis));
  for (std::size_t i = 0; i < variants.size(); ++i) {
    t.rows.push_back(run_one(variants[i], configs[i], data, eval_split));
  }
  return t;
}

ExperimentTable run_sweep(const TrainConfig& base, const Dataset& data, SweepParam param,
                          const std::vector<double>& values, Split eval_split) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<TrainConfig> configs;
  for (double v : values) configs.push_back(sweep_config(base, param, v));

  ExperimentTable t;
  t.kind = "sweep:" + std::string(sweep_param_name(param));
  for (std::size_t i = 0; i < values.size(); ++i) {
    t.rows.push_back(run_one(std::string(sweep_param_name(param)) + "=" + fmt_value(values[i]), configs[i],
                             data, eval_split));
  }
  return t;
}

nlohmann::ordered_json table_json(const ExperimentTable& table) {
  nlohmann::ordered_json j;
  j["kind"] = table.kind;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : table.rows) {
    nlohmann::ordered_json row;
    row["label"] = r.label;
    const auto metrics = report_json(r.report);
    for (const auto& [k, v] : metrics.items()) row[k] = v;
    if (!r.log.empty()) row["final_l_joint"] = r.log.back().loss.l_joint;
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  return j;
}

std::string table_text(const ExperimentTable& table) {
  std::string out = table.kind + "\n";
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-20s %8s %8s %8s %8s\n", "variant", "MRR", "Hits@1", "Hits@3", "Hits@5");
  out += buf;
  for (const auto& r : table.rows) {
    std::snprintf(buf, sizeof buf, "%-20s %8.2f %8.2f %8.2f %8.2f\n", r.label.c_str(), 100 * r.report.mrr,
                  100 * r.report.hits1, 100 * r.report.hits3, 100 * r.report.hits5);
    out += buf;
  }
  return out;
}

}  // namespace m3el
