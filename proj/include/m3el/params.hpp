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

#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "m3el/autodiff.hpp"
#include "m3el/tensor.hpp"

namespace m3el {

struct ParamId {
  std::size_t index = 0;
};

// Ordered, named collection of trainable tensors.
class ParamStore {
 public:
  ParamId add(std::string name, Tensor init);

  Tensor& operator[](ParamId id) { return values_.at(id.index); }
  const Tensor& operator[](ParamId id) const { return values_.at(id.index); }
  Tensor& at(std::size_t i) { return values_.at(i); }
  const Tensor& at(std::size_t i) const { return values_.at(i); }
  const std::string& name(std::size_t i) const { return names_.at(i); }

  std::size_t size() const { return values_.size(); }
  std::size_t scalar_count() const;
  std::vector<Tensor>& values() { return values_; }
  const std::vector<Tensor>& values() const { return values_; }
  const std::vector<std::string>& names() const { return names_; }

  bool operator==(const ParamStore&) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
};

// Lazily binds store tensors as differentiable leaves of one graph.
class ParamBinding {
 public:
  ParamBinding(ad::Graph& graph, const ParamStore& store);

  ad::Var operator()(ParamId id);
  ad::Graph& graph() { return graph_; }

  // Per-parameter gradients aligned with the store; zeros for parameters
  // the loss never touched.
  std::vector<Tensor> gradients(const ad::Gradients& grads) const;

 private:
  ad::Graph& graph_;
  const ParamStore& store_;
  std::vector<ad::Var> vars_;
};

// Affine map y = x W + b with W: in x out, b: 1 x out.
struct Affine {
  ParamId weight;
  ParamId bias;
  std::size_t in = 0;
  std::size_t out = 0;

  ad::Var apply(ParamBinding& p, ad::Var x) const;
  std::size_t scalar_count() const { return in * out + out; }
};

// Xavier-uniform weight, zero bias.
Affine add_affine(ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
                  std::mt19937_64& rng);

}  // namespace m3el
