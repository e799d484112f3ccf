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

// m3el: synth | train | eval | ablate | sweep | report
//
// Exit codes: 0 ok, 2 config/validation, 3 data, 4 numeric.

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "m3el/accounting.hpp"
#include "m3el/checkpoint.hpp"
#include "m3el/config.hpp"
#include "m3el/errors.hpp"
#include "m3el/eval.hpp"
#include "m3el/experiments.hpp"
#include "m3el/feature_store.hpp"
#include "m3el/model.hpp"
#include "m3el/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

std::uint64_t parse_u64(const std::string& s, const std::string& what) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw m3el::ConfigError(what + ": '" + s + "' is not an unsigned integer");
  }
  return v;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw m3el::DataError("cannot write '" + path.string() + "'");
  out << text;
}

// Shared knobs of every command that builds a TrainConfig. Priority, lowest
// first: built-in defaults, M3EL_SEED, config file, --set, dedicated flags.
struct ConfigArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_steps;
  std::optional<double> lr;
  std::optional<std::size_t> batch_size;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key = value config file");
    cmd->add_option("--set", sets, "override one config key (key=value), repeatable");
    cmd->add_option("--seed", seed, "random seed");
    cmd->add_option("--max-steps", max_steps, "optimizer steps");
    cmd->add_option("--lr", lr, "learning rate");
    cmd->add_option("--batch-size", batch_size, "mentions per batch");
  }

  m3el::TrainConfig build() const {
    m3el::TrainConfig cfg;
    if (const char* env = std::getenv("M3EL_SEED"); env != nullptr && *env != '\0') {
      cfg.seed = parse_u64(env, "M3EL_SEED");
    }
    if (!config_path.empty()) cfg = m3el::load_config(config_path, cfg);
    for (const auto& s : sets) {
      auto eq = s.find('=');
      if (eq == std::string::npos) throw m3el::ConfigError("--set expects key=value, got '" + s + "'");
      std::string key = s.substr(0, eq);
      std::string value = s.substr(eq + 1);
      auto trim = [](std::string& x) {
        x.erase(0, x.find_first_not_of(' '));
        x.erase(x.find_last_not_of(' ') + 1);
      };
      trim(key);
      trim(value);
      m3el::set_config_value(cfg, key, value);
    }
    if (seed) cfg.seed = *seed;
    if (max_steps) cfg.max_steps = *max_steps;
    if (lr) cfg.lr = *lr;
    if (batch_size) cfg.batch_size = *batch_size;
    cfg.validate();
    return cfg;
  }
};

void emit(const json& j, const std::string& out_path) {
  std::string text = j.dump(2) + "\n";
  if (!out_path.empty()) write_text(out_path, text);
  std::cout << text;
}

// A run on synthetic data needs small dims; this is what `synth` suggests.
m3el::TrainConfig suggested_config(const m3el::SynthSpec& spec, std::uint64_t seed) {
  m3el::TrainConfig cfg;
  cfg.seed = seed;
  cfg.lr = 1e-3;
  cfg.max_steps = 500;
  cfg.dims.text_dim = spec.text_dim;
  cfg.dims.vision_dim = spec.vision_dim;
  cfg.dims.vision_input_dim = spec.vision_dim;
  cfg.dims.scaled_dim = 16;
  cfg.pad.max_text_rows = std::min<std::size_t>(cfg.pad.max_text_rows, spec.tokens);
  cfg.pad.max_patch_rows = std::min<std::size_t>(cfg.pad.max_patch_rows, spec.patches);
  const auto n_train = static_cast<std::size_t>(
      static_cast<double>(spec.num_mentions) * (1.0 - spec.valid_fraction - spec.test_fraction));
  cfg.batch_size = std::max<std::size_t>(2, std::min<std::size_t>(32, n_train));
  return cfg;
}

int run(int argc, char** argv) {
  CLI::App app{"m3el: multimodal entity linking engine"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "write a planted synthetic dataset");
  m3el::SynthSpec spec;
  std::uint64_t synth_seed = 42;
  std::string synth_out = "data";
  synth->add_option("--entities", spec.num_entities, "entity count");
  synth->add_option("--mentions", spec.num_mentions, "mention count");
  synth->add_option("--distractors", spec.distractors, "non-gold candidates per mention");
  synth->add_option("--sigma", spec.sigma, "mention global noise");
  synth->add_option("--local-sigma", spec.local_sigma, "local row noise");
  synth->add_option("--text-dim", spec.text_dim, "text width");
  synth->add_option("--vision-dim", spec.vision_dim, "vision width");
  synth->add_option("--tokens", spec.tokens, "text local rows");
  synth->add_option("--patches", spec.patches, "vision local rows");
  synth->add_option("--valid-fraction", spec.valid_fraction, "share of mentions in valid");
  synth->add_option("--test-fraction", spec.test_fraction, "share of mentions in test");
  synth->add_option("--seed", synth_seed, "random seed");
  synth->add_option("--out", synth_out, "output directory");

  // train
  auto* train = app.add_subcommand("train", "train on a dataset directory");
  ConfigArgs train_cfg;
  train_cfg.attach(train);
  std::string train_data = "data", train_out = "run", resume_path;
  train->add_option("--data", train_data, "dataset directory");
  train->add_option("--out", train_out, "output directory");
  train->add_option("--resume", resume_path, "checkpoint to continue from");

  // eval
  auto* eval = app.add_subcommand("eval", "score a checkpoint on one split");
  std::string eval_ckpt, eval_data = "data", eval_split = "test", eval_out;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--data", eval_data, "dataset directory");
  eval->add_option("--split", eval_split, "train|valid|test");
  eval->add_option("--out", eval_out, "also write the JSON here");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "train and score each variant on one axis");
  ConfigArgs ablate_cfg;
  ablate_cfg.attach(ablate);
  std::string ablate_axis, ablate_variants, ablate_data = "data", ablate_split = "test", ablate_out;
  bool ablate_text = false;
  ablate->add_option("--axis", ablate_axis, "loss|module|pooling|direction")->required();
  ablate->add_option("--variants", ablate_variants, "comma-separated subset of the axis");
  ablate->add_option("--data", ablate_data, "dataset directory");
  ablate->add_option("--split", ablate_split, "split to score");
  ablate->add_option("--out", ablate_out, "also write the JSON here");
  ablate->add_flag("--text", ablate_text, "print a plain-text table instead of JSON");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "train and score one parameter grid");
  ConfigArgs sweep_cfg;
  sweep_cfg.attach(sweep);
  std::string sweep_param, sweep_values, sweep_data = "data", sweep_split = "test", sweep_out;
  bool sweep_text = false;
  sweep->add_option("--param", sweep_param, "K|tau|beta|gamma")->required();
  sweep->add_option("--values", sweep_values, "comma-separated grid")->required();
  sweep->add_option("--data", sweep_data, "dataset directory");
  sweep->add_option("--split", sweep_split, "split to score");
  sweep->add_option("--out", sweep_out, "also write the JSON here");
  sweep->add_flag("--text", sweep_text, "print a plain-text table instead of JSON");

  // report
  auto* report = app.add_subcommand("report", "parameter count and forward FLOPs");
  ConfigArgs report_cfg;
  report_cfg.attach(report);
  std::string report_ckpt, report_out;
  m3el::FlopShape shape;
  report->add_option("--checkpoint", report_ckpt, "take dims from a checkpoint");
  report->add_option("--mentions", shape.mentions, "mentions in the FLOP workload");
  report->add_option("--candidates", shape.candidates, "candidates per mention");
  report->add_option("--out", report_out, "also write the JSON here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  if (*synth) {
    m3el::Dataset data = m3el::generate_synthetic(spec, synth_seed);
    m3el::save_dataset(data, synth_out);
    write_text(fs::path(synth_out) / "config.txt", m3el::serialize_config(suggested_config(spec, synth_seed)));
    json j;
    j["out"] = synth_out;
    j["entities"] = data.entity_text.size();
    j["mentions"] = data.mention_text.size();
    std::cout << j.dump() << "\n";
    return kExitOk;
  }

  if (*train) {
    m3el::TrainConfig cfg = train_cfg.build();
    m3el::Dataset data = m3el::load_dataset(train_data);
    std::optional<m3el::Checkpoint> resume;
    if (!resume_path.empty()) resume = m3el::load_checkpoint(resume_path);
    m3el::TrainResult r = m3el::train(cfg, data, resume);
    fs::create_directories(train_out);
    m3el::save_checkpoint(r.best, fs::path(train_out) / "best.m3ck");
    m3el::save_checkpoint(r.last, fs::path(train_out) / "last.m3ck");
    write_text(fs::path(train_out) / "loss_log.json", m3el::loss_log_json(r.log).dump(2) + "\n");
    write_text(fs::path(train_out) / "config.txt", m3el::serialize_config(cfg));
    json j;
    j["config_fingerprint"] = m3el::config_fingerprint(cfg);
    j["steps"] = r.last.step;
    j["final_l_joint"] = r.log.empty() ? 0.0 : r.log.back().loss.l_joint;
    j["checkpoint"] = (fs::path(train_out) / "best.m3ck").string();
    std::cout << j.dump() << "\n";
    return kExitOk;
  }

  if (*eval) {
    m3el::Split split = m3el::parse_split(eval_split);
    m3el::Checkpoint ckpt = m3el::load_checkpoint(eval_ckpt);
    m3el::Dataset data = m3el::load_dataset(eval_data);
    emit(m3el::report_json(m3el::evaluate_split(ckpt, data, split)), eval_out);
    return kExitOk;
  }

  if (*ablate) {
    m3el::TrainConfig cfg = ablate_cfg.build();
    auto axis = m3el::parse_axis(ablate_axis);
    auto split = m3el::parse_split(ablate_split);
    auto variants = split_csv(ablate_variants);
    // Validate every variant before touching the data.
    for (const auto& v : variants.empty() ? m3el::default_variants(axis) : variants) {
      (void)m3el::ablation_config(cfg, axis, v);
    }
    m3el::Dataset data = m3el::load_dataset(ablate_data);
    auto table = m3el::run_ablation(cfg, data, axis, variants, split);
    if (!ablate_out.empty()) write_text(ablate_out, m3el::table_json(table).dump(2) + "\n");
    std::cout << (ablate_text ? m3el::table_text(table) : m3el::table_json(table).dump(2) + "\n");
    return kExitOk;
  }

  if (*sweep) {
    m3el::TrainConfig cfg = sweep_cfg.build();
    auto param = m3el::parse_sweep_param(sweep_param);
    auto split = m3el::parse_split(sweep_split);
    std::vector<double> values;
    for (const auto& s : split_csv(sweep_values)) {
      double v = 0.0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size()) {
        throw m3el::ConfigError("--values: '" + s + "' is not a number");
      }
      values.push_back(v);
    }
    for (double v : values) (void)m3el::sweep_config(cfg, param, v);
    m3el::Dataset data = m3el::load_dataset(sweep_data);
    auto table = m3el::run_sweep(cfg, data, param, values, split);
    if (!sweep_out.empty()) write_text(sweep_out, m3el::table_json(table).dump(2) + "\n");
    std::cout << (sweep_text ? m3el::table_text(table) : m3el::table_json(table).dump(2) + "\n");
    return kExitOk;
  }

  if (*report) {
    m3el::TrainConfig cfg;
    if (!report_ckpt.empty()) {
      cfg = m3el::load_checkpoint(report_ckpt).config;
    } else {
      cfg = report_cfg.build();
    }
    m3el::ModelParams params = m3el::init_model(cfg.dims, cfg.seed);
    m3el::ParamCount count = m3el::count_params(params);
    json j;
    j["config_fingerprint"] = m3el::config_fingerprint(cfg);
    json comps = json::object();
    for (const auto& [name, n] : count.components) comps[name] = n;
    j["params"] = comps;
    j["params_total"] = count.total;
    j["flops"] = m3el::estimate_flops(cfg.dims, cfg.pad, m3el::score_options(cfg.loss), shape);
    j["flop_shape"] = {{"mentions", shape.mentions}, {"candidates", shape.candidates}};
    emit(j, report_out);
    return kExitOk;
  }
  return kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const m3el::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const m3el::ContractError& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kExitConfig;
  } catch (const m3el::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const m3el::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  }
}
