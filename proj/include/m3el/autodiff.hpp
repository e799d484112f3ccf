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
#include <cstdint>
#include <limits>
#include <string_view>
#include <vector>

#include "m3el/tensor.hpp"

namespace m3el::ad {

// Reverse-mode differentiation over the closed set of ops the matching
// network needs. Every op checks its output for NaN/Inf.

enum class Op : std::uint8_t {
  kLeaf,
  kMatMul,
  kMatMulNT,
  kAddBias,
  kAdd,
  kSub,
  kMul,
  kScale,
  kMulScalar,
  kRowSoftmax,
  kColSoftmax,
  kRelu,
  kTanh,
  kExp,
  kLog,
  kPool,
  kConcatRows,
  kSum,
  kMean,
  kRowSum,
  kColSum,
  kCosineMatrix,
  kSoftmaxCrossEntropy,
  kStack,
};

std::string_view op_name(Op op);

enum class Pooling : std::uint8_t { kMean, kMax, kSoft };

std::string_view pooling_name(Pooling p);
Pooling parse_pooling(std::string_view s);

enum class Activation : std::uint8_t { kRelu, kTanh };

// Handle to a node inside one Graph.
struct Var {
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::size_t id = kNone;
  bool valid() const { return id != kNone; }
};

// Gradients indexed by node id; nodes that do not require grad hold an
// empty tensor.
class Gradients {
 public:
  explicit Gradients(std::vector<Tensor> g) : grads_(std::move(g)) {}
  // Gradient of the loss w.r.t. `v`; zeros of v's shape if unreachable.
  const Tensor& operator[](Var v) const { return grads_.at(v.id); }

 private:
  std::vector<Tensor> grads_;
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var input(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return input(std::move(value), false); }

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  std::size_t size() const { return nodes_.size(); }

  Var matmul(Var a, Var b);
  Var matmul_nt(Var a, Var b);  // a * b^T
  Var dot(Var a, Var b);        // 1 x n . 1 x n -> 1 x 1
  Var add_bias(Var x, Var bias);  // m x n + broadcast 1 x n
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var scale(Var x, double s);
  Var mul_scalar(Var s, Var x);  // (1 x 1 var) * x

  // Softmax across each row; columns with mask 0 get weight 0.
  Var row_softmax(Var x, const Mask& col_mask = {});
  // Softmax down each column; rows with mask 0 get weight 0.
  Var col_softmax(Var x, const Mask& row_mask = {});

  Var activate(Var x, Activation kind);
  Var relu(Var x) { return activate(x, Activation::kRelu); }
  Var tanh(Var x) { return activate(x, Activation::kTanh); }
  Var exp(Var x);
  Var log(Var x);

  // Reduce valid rows to one 1 x n row.
  Var pool_rows(Var x, Pooling mode, const Mask& row_mask = {});

  Var concat_rows(Var top, Var bottom);
  Var sum(Var x);
  Var mean(Var x);
  Var row_sum(Var x);  // m x n -> m x 1
  Var col_sum(Var x);  // m x n -> 1 x n

  // Pairwise cosine similarity a_i.b_j / (|a_i||b_j| + eps).
  Var cosine_matrix(Var a, Var b, double eps = 1e-8);

  // Mean over rows of -log softmax(row)[gold[row]].
  Var softmax_cross_entropy(Var scores, const std::vector<std::size_t>& gold);

  // Gathers 1 x 1 vars into a rows x cols matrix, row-major.
  Var stack(const std::vector<Var>& scalars, std::size_t rows, std::size_t cols);

  // Gradients of a 1 x 1 loss with respect to every node.
  Gradients backward(Var loss) const;

  // One entry per relu element (sign of its input) and per max-pool column
  // (argmax row). Two evaluations with equal signatures took the same
  // smooth branch everywhere.
  const std::vector<std::int32_t>& kink_signature() const { return signature_; }

 private:
  struct Node {
    Op op = Op::kLeaf;
    std::vector<std::size_t> inputs;
    Tensor value;
    Tensor aux;  // cached intermediate (relu input, pool argmax/weights, ...)
    Mask mask;
    std::vector<std::size_t> index;
    double scalar = 0.0;
    Pooling pooling = Pooling::kMean;
    bool requires_grad = false;
  };

  Var push(Node node);
  const Node& node(Var v) const { return nodes_.at(v.id); }
  bool needs(std::initializer_list<Var> vs) const;

  std::vector<Node> nodes_;
  std::vector<std::int32_t> signature_;
};

}  // namespace m3el::ad
