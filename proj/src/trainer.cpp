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

#include "m3el/trainer.hpp"

#include <cmath>
#include <random>
#include <string>

#include "m3el/errors.hpp"
#include "m3el/model.hpp"

namespace m3el {
namespace {

std::mt19937_64 step_rng(std::uint64_t seed, std::uint64_t step) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32)};
  return std::mt19937_64(seq);
}

void check_finite(const LossBreakdown& b, std::uint64_t step) {
  const std::pair<const char*, double> parts[] = {{"l_cl", b.l_cl}, {"l_u", b.l_u}, {"l_t", b.l_t},
                                                  {"l_v", b.l_v},   {"l_c", b.l_c}, {"l_joint", b.l_joint}};
  for (const auto& [name, v] : parts) {
    if (!std::isfinite(v)) {
      throw NumericError("step " + std::to_string(step) + ": non-finite loss component " + name);
    }
  }
}

}  // namespace

TrainResult train(const TrainConfig& config, const Dataset& data, const std::optional<Checkpoint>& resume) {
  config.validate();
  if (data.text_dim() != config.dims.text_dim) {
    throw DataError("text banks have width " + std::to_string(data.text_dim()) + " but d_t = " +
                    std::to_string(config.dims.text_dim));
  }
  if (data.vision_dim() != config.dims.vision_input_dim) {
    throw DataError("vision banks have width " + std::to_string(data.vision_dim()) +
                    " but vision_input_dim = " + std::to_string(config.dims.vision_input_dim));
  }

  const Manifest manifest = apply_low_resource(data.manifest, config.low_resource_fraction, config.seed);
  const Manifest train_set = filter_split(manifest, Split::kTrain);
  const bool has_valid = !filter_split(manifest, Split::kValid).empty();
  if (train_set.empty()) throw DataError("no train mentions in the manifest");
  if (config.batch_size > train_set.size()) {
    throw ConfigError("batch_size " + std::to_string(config.batch_size) + " exceeds the " +
                      std::to_string(train_set.size()) + " train mentions");
  }
  Dataset eval_data;
  if (has_valid) {
    eval_data = data;
    eval_data.manifest = manifest;
  }

  Checkpoint state;
  if (resume) {
    if (resume->params.dims != config.dims) throw ConfigError("resume checkpoint dims differ from config");
    state = *resume;
    state.config = config;
    state.optimizer.config = config.adamw();
  } else {
    state.config = config;
    state.params = init_model(config.dims, config.seed);
    state.optimizer = make_optimizer_state(state.params.store, config.adamw());
    state.step = 0;
  }

  const ScoreOptions options = score_options(config.loss);
  const std::size_t steps_per_pass = (train_set.size() + config.batch_size - 1) / config.batch_size;
  const std::size_t eval_every = config.eval_every > 0 ? config.eval_every : steps_per_pass;

  TrainResult result;
  double best_mrr = -1.0;
  auto validate_now = [&] {
    const EvalReport r = evaluate_split(state.params, options, eval_data, Split::kValid, config.pad);
    result.validation.push_back({state.step, r.mrr});
    if (r.mrr > best_mrr) {
      best_mrr = r.mrr;
      result.best = state;
    }
  };

  while (state.step < config.max_steps) {
    const std::uint64_t step = state.step + 1;
    std::mt19937_64 rng = step_rng(config.seed, step);
    const Batch batch = assemble_batch(train_set, data, config.batch_size, rng, config.pad);

    ad::Graph g;
    ParamBinding binding(g, state.params.store);
    StepLog entry;
    entry.step = step;
    std::vector<Tensor> grads;
    try {
      const BatchForward fwd = forward_batch(binding, state.params, batch, options);
      const JointLoss loss = joint_loss(g, fwd.scores, fwd.globals, fwd.gold, config.loss);
      entry.loss = loss.breakdown;
      check_finite(entry.loss, step);
      grads = binding.gradients(g.backward(loss.total));
    } catch (const NumericError& e) {
      throw NumericError("step " + std::to_string(step) + ": " + e.what());
    }
    entry.grad_norm = clip_global_norm(grads, config.grad_clip);
    adamw_step(state.params.store, grads, state.optimizer);
    state.step = step;
    result.log.push_back(entry);

    if (has_valid && (state.step % eval_every == 0)) validate_now();
  }
  if (has_valid && (result.validation.empty() || result.validation.back().step != state.step)) {
    validate_now();
  }

  result.last = state;
  if (!has_valid) result.best = state;
  return result;
}

nlohmann::ordered_json loss_log_json(const std::vector<StepLog>& log) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& s : log) {
    nlohmann::ordered_json j;
    j["step"] = s.step;
    j["l_cl"] = s.loss.l_cl;
    j["l_u"] = s.loss.l_u;
    j["l_t"] = s.loss.l_t;
    j["l_v"] = s.loss.l_v;
    j["l_c"] = s.loss.l_c;
    j["l_joint"] = s.loss.l_joint;
    j["grad_norm"] = s.grad_norm;
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace m3el
