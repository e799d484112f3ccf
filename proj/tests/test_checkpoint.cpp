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

#include "doctest.h"
#include "fixtures.hpp"
#include "m3el/accounting.hpp"
#include "m3el/checkpoint.hpp"
#include "m3el/errors.hpp"

using namespace m3el;

namespace {

Checkpoint sample(bool adapter = false) {
  TrainConfig cfg = fixture::tiny_config(fixture::tiny_spec());
  if (adapter) cfg.dims.vision_input_dim = 10;
  Checkpoint c{cfg, init_model(cfg.dims, 4), {}, 17};
  fixture::jitter(c.params, 9);
  c.optimizer = make_optimizer_state(c.params.store, cfg.adamw());
  c.optimizer.step = 17;
  for (auto& t : c.optimizer.m)
    for (auto& v : t.data()) v = 0.125;
  for (auto& t : c.optimizer.v)
    for (auto& v : t.data()) v = 3.0e-7;
  return c;
}

}  // namespace

TEST_CASE("checkpoint round trip is bit-exact") {
  for (bool adapter : {false, true}) {
    const Checkpoint c = sample(adapter);
    const auto bytes = encode_checkpoint(c);
    const Checkpoint back = decode_checkpoint(bytes);
    CHECK(back.params.store == c.params.store);
    CHECK(back.optimizer == c.optimizer);
    CHECK(back.step == 17);
    CHECK(serialize_config(back.config) == serialize_config(c.config));
    CHECK(back.params.vision_adapter.has_value() == adapter);
    CHECK(count_params(back.params).total == count_params(c.params).total);
    CHECK(encode_checkpoint(back) == bytes);
  }
}

TEST_CASE("checkpoint file round trip") {
  const auto path = std::filesystem::temp_directory_path() / "m3el_test.m3ck";
  const Checkpoint c = sample();
  save_checkpoint(c, path);
  CHECK(load_checkpoint(path).params.store == c.params.store);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/c.m3ck"), DataError);
}

TEST_CASE("corruption is detected") {
  const auto bytes = encode_checkpoint(sample());
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x01;
  CHECK_THROWS_AS(decode_checkpoint(flipped), DataError);

  auto magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(magic), BadMagicError);

  auto cut = bytes;
  cut.resize(bytes.size() - 9);
  CHECK_THROWS_AS(decode_checkpoint(cut), DataError);
  CHECK_THROWS_AS(decode_checkpoint(std::vector<std::uint8_t>{}), DataError);
}
