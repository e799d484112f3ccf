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

#include "m3el/params.hpp"

#include <cmath>

#include "m3el/errors.hpp"

namespace m3el {

ParamId ParamStore::add(std::string name, Tensor init) {
  names_.push_back(std::move(name));
  values_.push_back(std::move(init));
  return ParamId{values_.size() - 1};
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : values_) n += t.size();
  return n;
}

ParamBinding::ParamBinding(ad::Graph& graph, const ParamStore& store)
    : graph_(graph), store_(store), vars_(store.size()) {}

ad::Var ParamBinding::operator()(ParamId id) {
  ad::Var& v = vars_.at(id.index);
  if (!v.valid()) v = graph_.input(store_[id], true);
  return v;
}

std::vector<Tensor> ParamBinding::gradients(const ad::Gradients& grads) const {
  std::vector<Tensor> out;
  out.reserve(vars_.size());
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    const Tensor& p = store_.at(i);
    if (vars_[i].valid()) {
      out.push_back(grads[vars_[i]]);
    } else {
      out.emplace_back(p.rows(), p.cols());
    }
  }
  return out;
}

ad::Var Affine::apply(ParamBinding& p, ad::Var x) const {
  ad::Graph& g = p.graph();
  return g.add_bias(g.matmul(x, p(weight)), p(bias));
}

Affine add_affine(ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
                  std::mt19937_64& rng) {
  if (in == 0 || out == 0) throw ConfigError("affine map '" + name + "' has a zero dimension");
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor w(in, out);
  for (auto& v : w.data()) v = dist(rng);
  Affine a;
  a.in = in;
  a.out = out;
  a.weight = store.add(name + ".weight", std::move(w));
  a.bias = store.add(name + ".bias", Tensor(1, out));
  return a;
}

}  // namespace m3el
