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

#include "m3el/accounting.hpp"

#include <map>

namespace m3el {
namespace {

using u64 = std::uint64_t;

u64 affine(u64 rows, u64 in, u64 out) { return 2 * rows * in * out + rows * out; }
u64 softmax(u64 n) { return 3 * n; }
u64 dotp(u64 n) { return 2 * n; }

// One CMN direction for one object: global width g (= d_c), r local rows of
// width l, K heads.
u64 cmn_direction(u64 g, u64 l, u64 r, u64 heads) {
  u64 f = affine(1, g, g) + affine(r, l, g);
  f += matmul_flops(1, g, r) + softmax(r);  // global -> local attention
  f += matmul_flops(r, g, 1) + softmax(r);  // local -> global (r singleton softmaxes)
  f += matmul_flops(1, r, g) + g;           // enhanced global + relu
  f += matmul_flops(r, 1, g) + r * g;       // enhanced locals + relu
  const u64 h = (r + 1) * g;
  const u64 per_head = 1 + h + softmax(h) + h + h;  // exp(omega), scale, softmax, weight, column sum
  f += heads * per_head + (heads - 1) * g + g;     // head sum, mean
  f += 3 * g;                                       // tanh gate, product, residual add
  return f;
}

// Attention score of one (entity, mention) pair in one modality.
u64 g2l_pair(u64 re, u64 rm, u64 s) {
  u64 f = matmul_flops(re, s, rm) + re * rm + softmax(re * rm);
  f += matmul_flops(re, rm, s);
  f += re * s + s;  // mean pool
  f += dotp(s);
  return f;
}

}  // namespace

std::uint64_t matmul_flops(std::uint64_t m, std::uint64_t k, std::uint64_t n) { return 2 * m * k * n; }

ParamCount count_params(const ModelParams& params) {
  ParamCount c;
  std::map<std::string, std::size_t> order;
  for (std::size_t i = 0; i < params.store.size(); ++i) {
    const std::string& name = params.store.name(i);
    std::string group = name.substr(0, name.find('.'));
    if (group != "vision_adapter") {
      const auto second = name.find('.', group.size() + 1);
      group = name.substr(0, second);
    }
    if (!order.contains(group)) {
      order[group] = c.components.size();
      c.components.emplace_back(group, 0);
    }
    c.components[order[group]].second += params.store.at(i).size();
    c.total += params.store.at(i).size();
  }
  return c;
}

std::uint64_t estimate_flops(const ModelDims& dims, const PadConfig& pad, const ScoreOptions& options,
                             const FlopShape& shape) {
  const u64 dt = dims.text_dim, dv = dims.vision_dim, s = dims.scaled_dim, K = dims.heads;
  const u64 lt = pad.max_text_rows, lv = pad.max_patch_rows;
  const bool adapter = dims.vision_input_dim != dims.vision_dim;

  u64 shared = adapter ? affine(1 + lv, dims.vision_input_dim, dv) : 0;
  if (options.scores.cross && options.directions.t2v) shared += cmn_direction(dt, dv, lv, K);
  if (options.scores.cross && options.directions.v2t) shared += cmn_direction(dv, dt, lt, K);

  u64 entity = shared, mention = shared, pair = 0;
  int n_scores = 0;
  if (options.scores.text) {
    entity += affine(1, dt, s) + affine(lt, dt, s);
    mention += 2 * affine(lt, dt, s);
    pair += dotp(dt) + g2l_pair(lt, lt, s) + 2;
    ++n_scores;
  }
  if (options.scores.vision) {
    entity += affine(1, dv, s) + affine(lv, dv, s);
    mention += 2 * affine(lv, dv, s);
    pair += dotp(dv) + g2l_pair(lv, lv, s) + 2;
    ++n_scores;
  }
  if (options.scores.cross) {
    int dirs = 0;
    if (options.directions.t2v) pair += dotp(dt), ++dirs;
    if (options.directions.v2t) pair += dotp(dv), ++dirs;
    if (dirs == 2) pair += 2;
    ++n_scores;
  }
  pair += static_cast<u64>(n_scores - 1) + 1;  // union mean

  return shape.mentions * (mention + shape.candidates * (entity + pair));
}

}  // namespace m3el
