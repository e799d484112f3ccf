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

#include "m3el/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <sstream>

#include <zlib.h>

#include "m3el/errors.hpp"

namespace m3el {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError("key '" + std::string(key) + "': '" + std::string(v) + "' is not a number");
  }
  return out;
}

std::uint64_t parse_uint(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("key '" + std::string(key) + "': '" + std::string(v) +
                      "' is not a non-negative integer");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("key '" + std::string(key) + "': '" + std::string(v) + "' is not a boolean");
}

std::string fmt_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

struct Field {
  std::function<std::string(TrainConfig)> get;
  std::function<void(TrainConfig&, std::string_view)> set;
};

// Ordered registry; serialization follows this order. Each accessor maps a
// config to a reference to one member.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const auto* table = [] {
    auto* t = new std::vector<std::pair<std::string, Field>>();
    auto dbl = [&](const char* key, auto member) {
      t->emplace_back(key, Field{[member](TrainConfig c) { return fmt_double(member(c)); },
                                 [member, key](TrainConfig& c, std::string_view v) {
                                   member(c) = parse_double(key, v);
                                 }});
    };
    auto uint = [&](const char* key, auto member) {
      t->emplace_back(key, Field{[member](TrainConfig c) { return std::to_string(member(c)); },
                                 [member, key](TrainConfig& c, std::string_view v) {
                                   using T = std::remove_reference_t<decltype(member(c))>;
                                   member(c) = static_cast<T>(parse_uint(key, v));
                                 }});
    };
    auto flag = [&](const char* key, auto member) {
      t->emplace_back(key, Field{[member](TrainConfig c) { return std::string(member(c) ? "true" : "false"); },
                                 [member, key](TrainConfig& c, std::string_view v) {
                                   member(c) = parse_bool(key, v);
                                 }});
    };
    dbl("lr", [](TrainConfig& c) -> double& { return c.lr; });
    uint("batch_size", [](TrainConfig& c) -> std::size_t& { return c.batch_size; });
    uint("max_steps", [](TrainConfig& c) -> std::size_t& { return c.max_steps; });
    uint("eval_every", [](TrainConfig& c) -> std::size_t& { return c.eval_every; });
    uint("seed", [](TrainConfig& c) -> std::uint64_t& { return c.seed; });
    dbl("weight_decay", [](TrainConfig& c) -> double& { return c.weight_decay; });
    dbl("adam_beta1", [](TrainConfig& c) -> double& { return c.beta1; });
    dbl("adam_beta2", [](TrainConfig& c) -> double& { return c.beta2; });
    dbl("adam_eps", [](TrainConfig& c) -> double& { return c.adam_eps; });
    dbl("grad_clip", [](TrainConfig& c) -> double& { return c.grad_clip; });
    uint("d_t", [](TrainConfig& c) -> std::size_t& { return c.dims.text_dim; });
    uint("d_v", [](TrainConfig& c) -> std::size_t& { return c.dims.vision_dim; });
    uint("vision_input_dim", [](TrainConfig& c) -> std::size_t& { return c.dims.vision_input_dim; });
    uint("d_s", [](TrainConfig& c) -> std::size_t& { return c.dims.scaled_dim; });
    uint("heads", [](TrainConfig& c) -> std::size_t& { return c.dims.heads; });
    uint("max_text_rows", [](TrainConfig& c) -> std::size_t& { return c.pad.max_text_rows; });
    uint("max_patch_rows", [](TrainConfig& c) -> std::size_t& { return c.pad.max_patch_rows; });
    dbl("tau", [](TrainConfig& c) -> double& { return c.loss.icl.tau; });
    dbl("beta", [](TrainConfig& c) -> double& { return c.loss.icl.beta; });
    dbl("gamma", [](TrainConfig& c) -> double& { return c.loss.icl.gamma; });
    t->emplace_back("pooling",
                    Field{[](TrainConfig c) { return std::string(ad::pooling_name(c.loss.pooling)); },
                          [](TrainConfig& c, std::string_view v) { c.loss.pooling = ad::parse_pooling(v); }});
    dbl("low_resource_fraction", [](TrainConfig& c) -> double& { return c.low_resource_fraction; });
    flag("loss_cl", [](TrainConfig& c) -> bool& { return c.loss.losses.cl; });
    flag("loss_u", [](TrainConfig& c) -> bool& { return c.loss.losses.uni; });
    flag("loss_t", [](TrainConfig& c) -> bool& { return c.loss.losses.text; });
    flag("loss_v", [](TrainConfig& c) -> bool& { return c.loss.losses.vision; });
    flag("loss_c", [](TrainConfig& c) -> bool& { return c.loss.losses.cross; });
    flag("score_t", [](TrainConfig& c) -> bool& { return c.loss.scores.text; });
    flag("score_v", [](TrainConfig& c) -> bool& { return c.loss.scores.vision; });
    flag("score_c", [](TrainConfig& c) -> bool& { return c.loss.scores.cross; });
    flag("t2v", [](TrainConfig& c) -> bool& { return c.loss.directions.t2v; });
    flag("v2t", [](TrainConfig& c) -> bool& { return c.loss.directions.v2t; });
    return t;
  }();
  return *table;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr >= 0.0)) throw ConfigError("lr must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (loss.losses.cl && batch_size < 2) {
    throw ConfigError("batch_size must be >= 2 when the contrastive loss is enabled");
  }
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
  if (!(grad_clip >= 0.0)) throw ConfigError("grad_clip must be >= 0");
  if (!(low_resource_fraction > 0.0 && low_resource_fraction <= 1.0)) {
    throw ConfigError("low_resource_fraction must lie in (0, 1]");
  }
  dims.validate();
  loss.validate();
}

std::string serialize_config(const TrainConfig& cfg) {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(cfg) + "\n";
  return out;
}

void set_config_value(TrainConfig& cfg, std::string_view key, std::string_view value) {
  for (const auto& [k, field] : fields()) {
    if (k == key) {
      field.set(cfg, trim(value));
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

TrainConfig parse_config(std::string_view text, const TrainConfig& base) {
  TrainConfig cfg = base;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = line;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    try {
      if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'");
      const auto key = trim(s.substr(0, eq));
      if (key.empty()) throw ConfigError("empty key");
      set_config_value(cfg, key, trim(s.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

TrainConfig load_config(const std::filesystem::path& path, const TrainConfig& base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  const std::string text(std::istreambuf_iterator<char>(in), {});
  try {
    return parse_config(text, base);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string config_fingerprint(const TrainConfig& cfg) {
  const std::string s = serialize_config(cfg);
  const uLong crc = crc32(0L, reinterpret_cast<const Bytef*>(s.data()), static_cast<uInt>(s.size()));
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08lx", static_cast<unsigned long>(crc));
  return buf;
}

}  // namespace m3el
