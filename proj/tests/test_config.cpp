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

#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "m3el/config.hpp"
#include "m3el/errors.hpp"

using namespace m3el;

TEST_CASE("defaults") {
  const TrainConfig c;
  CHECK(c.lr == 1e-5);
  CHECK(c.batch_size == 96);
  CHECK(c.weight_decay == 0.01);
  CHECK(c.grad_clip == 5.0);
  CHECK(c.dims.text_dim == 512);
  CHECK(c.dims.vision_dim == 96);
  CHECK(c.dims.scaled_dim == 96);
  CHECK(c.dims.heads == 5);
  CHECK(c.pad.max_text_rows == 40);
  CHECK(c.loss.icl.tau == 0.03);
  CHECK(c.loss.icl.beta == 0.8);
  CHECK(c.loss.icl.gamma == 1.0);
  CHECK(c.loss.pooling == ad::Pooling::kMean);
  c.validate();
}

TEST_CASE("serialize and parse round trip every field") {
  TrainConfig c;
  c.lr = 3.3e-4;
  c.batch_size = 17;
  c.max_steps = 123;
  c.eval_every = 9;
  c.seed = 18446744073709551615ull;
  c.weight_decay = 0.0;
  c.beta1 = 0.85;
  c.beta2 = 0.995;
  c.adam_eps = 1e-7;
  c.grad_clip = 0.0;
  c.dims = {32, 16, 24, 8, 3};
  c.pad = {7, 9};
  c.loss.icl = {0.1, 0.25, 0.75};
  c.loss.pooling = ad::Pooling::kSoft;
  c.low_resource_fraction = 0.2;
  c.loss.losses.vision = false;
  c.loss.scores.vision = false;
  c.loss.directions.v2t = false;
  const std::string text = serialize_config(c);
  const TrainConfig back = parse_config(text);
  CHECK(serialize_config(back) == text);
  CHECK(back.seed == c.seed);
  CHECK(back.lr == c.lr);
  CHECK(back.dims == c.dims);
  CHECK(back.loss.pooling == ad::Pooling::kSoft);
  CHECK_FALSE(back.loss.directions.v2t);
  CHECK(config_fingerprint(back) == config_fingerprint(c));
}

TEST_CASE("fingerprint changes with any field") {
  TrainConfig a, b;
  b.loss.pooling = ad::Pooling::kMax;
  CHECK(config_fingerprint(a) != config_fingerprint(b));
  CHECK(config_fingerprint(a).size() == 8);
  CHECK(config_fingerprint(a) == config_fingerprint(TrainConfig{}));
}

TEST_CASE("parse applies on top of a base, with comments") {
  TrainConfig base;
  base.seed = 5;
  const TrainConfig c = parse_config("# a comment\n\n  tau = 0.5   # trailing\nheads=7\n", base);
  CHECK(c.loss.icl.tau == 0.5);
  CHECK(c.dims.heads == 7);
  CHECK(c.seed == 5);
}

TEST_CASE("errors name the line") {
  auto line_of = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(line_of("lr = 1\nbogus = 3\n").find("line 2") != std::string::npos);
  CHECK(line_of("lr = 1\n\n\nlr = abc\n").find("line 4") != std::string::npos);
  CHECK(line_of("just words\n").find("line 1") != std::string::npos);
  CHECK(line_of("loss_cl = maybe\n").find("line 1") != std::string::npos);
  CHECK(line_of("pooling = median\n").find("line 1") != std::string::npos);
  CHECK(line_of("batch_size = -3\n").find("line 1") != std::string::npos);
}

TEST_CASE("set_config_value and validation") {
  TrainConfig c;
  set_config_value(c, "beta", "0");
  set_config_value(c, "loss_cl", "false");
  CHECK(c.loss.icl.beta == 0.0);
  CHECK_FALSE(c.loss.losses.cl);
  CHECK_THROWS_AS(set_config_value(c, "nope", "1"), ConfigError);

  TrainConfig bad;
  bad.batch_size = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);  // contrastive term needs negatives
  bad.loss.losses.cl = false;
  bad.validate();
  bad = TrainConfig{};
  bad.loss.icl.tau = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = TrainConfig{};
  bad.low_resource_fraction = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = TrainConfig{};
  bad.dims.heads = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("load_config from a file") {
  const auto path = std::filesystem::temp_directory_path() / "m3el_test_config.txt";
  {
    std::ofstream out(path);
    out << "lr = 0.002\nmax_steps = 3\n";
  }
  const TrainConfig c = load_config(path);
  CHECK(c.lr == 0.002);
  CHECK(c.max_steps == 3);
  CHECK_THROWS_AS(load_config("/nonexistent/cfg.txt"), ConfigError);
}
