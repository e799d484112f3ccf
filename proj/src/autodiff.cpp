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

#include "m3el/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "m3el/errors.hpp"

namespace m3el::ad {
namespace {

bool valid_at(const Mask& m, std::size_t i) { return m.empty() || m[i] != 0; }

void check_mask(const Mask& m, std::size_t n, const char* what) {
  if (!m.empty() && m.size() != n) {
    throw DimensionError(std::string(what) + ": mask length " + std::to_string(m.size()) +
                         " != " + std::to_string(n));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(what) + ": shape " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
  }
}

void accumulate(Tensor& into, const Tensor& g) {
  for (std::size_t i = 0; i < g.size(); ++i) into[i] += g[i];
}

void accumulate_scaled(Tensor& into, const Tensor& g, double s) {
  if (into.size() == 0) into = Tensor(g.rows(), g.cols());
  for (std::size_t i = 0; i < g.size(); ++i) into[i] += s * g[i];
}

}  // namespace

std::string_view op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kMatMul: return "matmul";
    case Op::kMatMulNT: return "matmul_nt";
    case Op::kAddBias: return "add_bias";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kScale: return "scale";
    case Op::kMulScalar: return "mul_scalar";
    case Op::kRowSoftmax: return "row_softmax";
    case Op::kColSoftmax: return "col_softmax";
    case Op::kRelu: return "relu";
    case Op::kTanh: return "tanh";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kPool: return "pool_rows";
    case Op::kConcatRows: return "concat_rows";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kRowSum: return "row_sum";
    case Op::kColSum: return "col_sum";
    case Op::kCosineMatrix: return "cosine_matrix";
    case Op::kSoftmaxCrossEntropy: return "softmax_cross_entropy";
    case Op::kStack: return "stack";
  }
  return "?";
}

std::string_view pooling_name(Pooling p) {
  switch (p) {
    case Pooling::kMean: return "mean";
    case Pooling::kMax: return "max";
    case Pooling::kSoft: return "soft";
  }
  return "?";
}

Pooling parse_pooling(std::string_view s) {
  if (s == "mean") return Pooling::kMean;
  if (s == "max") return Pooling::kMax;
  if (s == "soft") return Pooling::kSoft;
  throw ConfigError("unknown pooling mode '" + std::string(s) + "' (expected mean|max|soft)");
}

Var Graph::push(Node node) {
  if (!node.value.all_finite()) {
    throw NumericError("non-finite output from op '" + std::string(op_name(node.op)) + "'");
  }
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

bool Graph::needs(std::initializer_list<Var> vs) const {
  return std::any_of(vs.begin(), vs.end(), [&](Var v) { return node(v).requires_grad; });
}

Var Graph::input(Tensor value, bool requires_grad) {
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

Var Graph::matmul(Var a, Var b) {
  Node n;
  n.op = Op::kMatMul;
  n.inputs = {a.id, b.id};
  n.value = m3el::matmul(value(a), value(b));
  n.requires_grad = needs({a, b});
  return push(std::move(n));
}

Var Graph::matmul_nt(Var a, Var b) {
  Node n;
  n.op = Op::kMatMulNT;
  n.inputs = {a.id, b.id};
  n.value = m3el::matmul_nt(value(a), value(b));
  n.requires_grad = needs({a, b});
  return push(std::move(n));
}

Var Graph::dot(Var a, Var b) {
  if (value(a).rows() != 1 || value(b).rows() != 1) throw DimensionError("dot expects row vectors");
  if (value(a).cols() != value(b).cols()) throw DimensionError("dot: length mismatch");
  return matmul_nt(a, b);
}

Var Graph::add_bias(Var x, Var bias) {
  const Tensor& xv = value(x);
  const Tensor& bv = value(bias);
  if (bv.rows() != 1 || bv.cols() != xv.cols()) throw DimensionError("add_bias: bias shape");
  Node n;
  n.op = Op::kAddBias;
  n.inputs = {x.id, bias.id};
  n.value = xv;
  for (std::size_t i = 0; i < xv.rows(); ++i)
    for (std::size_t j = 0; j < xv.cols(); ++j) n.value(i, j) += bv(0, j);
  n.requires_grad = needs({x, bias});
  return push(std::move(n));
}

Var Graph::add(Var a, Var b) {
  require_same_shape(value(a), value(b), "add");
  Node n;
  n.op = Op::kAdd;
  n.inputs = {a.id, b.id};
  n.value = value(a);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] += value(b)[i];
  n.requires_grad = needs({a, b});
  return push(std::move(n));
}

Var Graph::sub(Var a, Var b) {
  require_same_shape(value(a), value(b), "sub");
  Node n;
  n.op = Op::kSub;
  n.inputs = {a.id, b.id};
  n.value = value(a);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] -= value(b)[i];
  n.requires_grad = needs({a, b});
  return push(std::move(n));
}

Var Graph::mul(Var a, Var b) {
  require_same_shape(value(a), value(b), "mul");
  Node n;
  n.op = Op::kMul;
  n.inputs = {a.id, b.id};
  n.value = value(a);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] *= value(b)[i];
  n.requires_grad = needs({a, b});
  return push(std::move(n));
}

Var Graph::scale(Var x, double s) {
  Node n;
  n.op = Op::kScale;
  n.inputs = {x.id};
  n.scalar = s;
  n.value = value(x);
  for (auto& v : n.value.data()) v *= s;
  n.requires_grad = needs({x});
  return push(std::move(n));
}

Var Graph::mul_scalar(Var s, Var x) {
  const double sv = value(s).item();
  Node n;
  n.op = Op::kMulScalar;
  n.inputs = {s.id, x.id};
  n.value = value(x);
  for (auto& v : n.value.data()) v *= sv;
  n.requires_grad = needs({s, x});
  return push(std::move(n));
}

Var Graph::row_softmax(Var x, const Mask& col_mask) {
  const Tensor& xv = value(x);
  check_mask(col_mask, xv.cols(), "row_softmax");
  Node n;
  n.op = Op::kRowSoftmax;
  n.inputs = {x.id};
  n.mask = col_mask;
  n.value = Tensor(xv.rows(), xv.cols());
  for (std::size_t i = 0; i < xv.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < xv.cols(); ++j)
      if (valid_at(col_mask, j)) mx = std::max(mx, xv(i, j));
    if (!std::isfinite(mx)) throw DataError("row_softmax: every position is masked");
    double z = 0.0;
    for (std::size_t j = 0; j < xv.cols(); ++j) {
      if (!valid_at(col_mask, j)) continue;
      n.value(i, j) = std::exp(xv(i, j) - mx);
      z += n.value(i, j);
    }
    for (std::size_t j = 0; j < xv.cols(); ++j) n.value(i, j) /= z;
  }
  n.requires_grad = needs({x});
  return push(std::move(n));
}

Var Graph::col_softmax(Var x, const Mask& row_mask) {
  const Tensor& xv = value(x);
  check_mask(row_mask, xv.rows(), "col_softmax");
  Node n;
  n.op = Op::kColSoftmax;
  n.inputs = {x.id};
  n.mask = row_mask;
  n.value = Tensor(xv.rows(), xv.cols());
  for (std::size_t j = 0; j < xv.cols(); ++j) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < xv.rows(); ++i)
      if (valid_at(row_mask, i)) mx = std::max(mx, xv(i, j));
    if (!std::isfinite(mx)) throw DataError("col_softmax: every position is masked");
    double z = 0.0;
    for (std::size_t i = 0; i < xv.rows(); ++i) {
      if (!valid_at(row_mask, i)) continue;
      n.value(i, j) = std::exp(xv(i, j) - mx);
      z += n.value(i, j);
    }
    for (std::size_t i = 0; i < xv.rows(); ++i) n.value(i, j) /= z;
  }
  n.requires_grad = needs({x});
  return push(std::move(n));
}

Var Graph::activate(Var x, Activation kind) {
  const Tensor& xv = value(x);
  Node n;
  n.inputs = {x.id};
  n.value = xv;
  if (kind == Activation::kRelu) {
    n.op = Op::kRelu;
    n.aux = xv;
    for (std::size_t i = 0; i < xv.size(); ++i) {
      signature_.push_back(xv[i] > 0.0 ? 1 : 0);
      n.value[i] = xv[i] > 0.0 ? xv[i] : 0.0;
    }
  } else {
    n.op = Op::kTanh;
    for (auto& v : n.value.data()) v = std::tanh(v);
  }
  n.requires_grad = needs({x});
  return push(std::move(n));
}

Var Graph::exp(Var x) {
  Node n;
  n.op = Op::kExp;
  n.inputs = {x.id};
  n.value = value(x);
  for (auto& v : n.value.data()) v = std::exp(v);
  n.requires_grad = needs({x});
  return push(std::move(n));
}

Var Graph::log(Var x) {
  Node n;
  n.op = Op::kLog;
  n.inputs = {x.id};
  n.value = value(x);
  for (auto& v : n.value.data()) {
    if (!(v > 0.0)) throw NumericError("log of non-positive value");
    v = std::log(v);
  }
  n.requires_grad = needs({x});
  return push(std::move(n));
}

Var Graph::pool_rows(Var x, Pooling mode, const Mask& row_mask) {
  const Tensor& xv = value(x);
  if (xv.rows() == 0) throw DimensionError("pool_rows: empty input");
  check_mask(row_mask, xv.rows(), "pool_rows");
  std::size_t valid = 0;
  for (std::size_t i = 0; i < xv.rows(); ++i) valid += valid_at(row_mask, i) ? 1 : 0;
  if (valid == 0) throw DataError("pool_rows: every row is masked");

  Node n;
  n.op = Op::kPool;
  n.inputs = {x.id};
  n.mask = row_mask;
  n.pooling = mode;
  n.value = Tensor(1, xv.cols());
  switch (mode) {
    case Pooling::kMean:
      for (std::size_t i = 0; i < xv.rows(); ++i) {
        if (!valid_at(row_mask, i)) continue;
        for (std::size_t j = 0; j < xv.cols(); ++j) n.value(0, j) += xv(i, j);
      }
      for (auto& v : n.value.data()) v /= static_cast<double>(valid);
      n.scalar = static_cast<double>(valid);
      break;
    case Pooling::kMax:
      n.index.assign(xv.cols(), 0);
      for (std::size_t j = 0; j < xv.cols(); ++j) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < xv.rows(); ++i) {
          if (valid_at(row_mask, i) && xv(i, j) > best) {
            best = xv(i, j);
            n.index[j] = i;
          }
        }
        n.value(0, j) = best;
        signature_.push_back(static_cast<std::int32_t>(n.index[j]));
      }
      break;
    case Pooling::kSoft:
      // Per column: weights are the softmax of the values themselves.
      n.aux = Tensor(xv.rows(), xv.cols());
      for (std::size_t j = 0; j < xv.cols(); ++j) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < xv.rows(); ++i)
          if (valid_at(row_mask, i)) mx = std::max(mx, xv(i, j));
        double z = 0.0;
        for (std::size_t i = 0; i < xv.rows(); ++i) {
          if (!valid_at(row_mask, i)) continue;
          n.aux(i, j) = std::exp(xv(i, j) - mx);
          z += n.aux(i, j);
        }
        double out = 0.0;
        for (std::size_t i = 0; i < xv.rows(); ++i) {
          n.aux(i, j) /= z;
          out += n.aux(i, j) * xv(i, j);
        }
        n.value(0, j) = out;
      }
      break;
  }
  n.requires_grad = needs({x});
  return push(std::move(n));
}

Var Graph::concat_rows(Var top, Var bottom) {
  const Tensor& a = value(top);
  const Tensor& b = value(bottom);
  if (a.cols() != b.cols()) throw DimensionError("concat_rows: column mismatch");
  std::vector<double> data(a.data().begin(), a.data().end());
  data.insert(data.end(), b.data().begin(), b.data().end());
  Node n;
  n.op = Op::kConcatRows;
  n.inputs = {top.id, bottom.id};
  n.value = Tensor(a.rows() + b.rows(), a.cols(), std::move(data));
  n.requires_grad = needs({top, bottom});
  return push(std::move(n));
}

Var Graph::sum(Var x) {
  double s = 0.0;
  for (double v : value(x).data()) s += v;
  Node n;
  n.op = Op::kSum;
  n.inputs = {x.id};
  n.value = Tensor::scalar(s);
  n.requires_grad = needs({x});
  return push(std::move(n));
}

Var Graph::mean(Var x) {
  const Tensor& xv = value(x);
  if (xv.size() == 0) throw DimensionError("mean of empty tensor");
  double s = 0.0;
  for (double v : xv.data()) s += v;
  Node n;
  n.op = Op::kMean;
  n.inputs = {x.id};
  n.value = Tensor::scalar(s / static_cast<double>(xv.size()));
  n.requires_grad = needs({x});
  return push(std::move(n));
}

Var Graph::row_sum(Var x) {
  const Tensor& xv = value(x);
  Node n;
  n.op = Op::kRowSum;
  n.inputs = {x.id};
  n.value = Tensor(xv.rows(), 1);
  for (std::size_t i = 0; i < xv.rows(); ++i)
    for (std::size_t j = 0; j < xv.cols(); ++j) n.value(i, 0) += xv(i, j);
  n.requires_grad = needs({x});
  return push(std::move(n));
}

Var Graph::col_sum(Var x) {
  const Tensor& xv = value(x);
  Node n;
  n.op = Op::kColSum;
  n.inputs = {x.id};
  n.value = Tensor(1, xv.cols());
  for (std::size_t i = 0; i < xv.rows(); ++i)
    for (std::size_t j = 0; j < xv.cols(); ++j) n.value(0, j) += xv(i, j);
  n.requires_grad = needs({x});
  return push(std::move(n));
}

Var Graph::cosine_matrix(Var a, Var b, double eps) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.cols() != bv.cols()) throw DimensionError("cosine_matrix: feature dims disagree");
  Node n;
  n.op = Op::kCosineMatrix;
  n.inputs = {a.id, b.id};
  n.scalar = eps;
  n.value = Tensor(av.rows(), bv.rows());
  for (std::size_t i = 0; i < av.rows(); ++i) {
    const double na = std::sqrt(m3el::dot(av.row_span(i), av.row_span(i)));
    for (std::size_t j = 0; j < bv.rows(); ++j) {
      const double nb = std::sqrt(m3el::dot(bv.row_span(j), bv.row_span(j)));
      n.value(i, j) = m3el::dot(av.row_span(i), bv.row_span(j)) / (na * nb + eps);
    }
  }
  n.requires_grad = needs({a, b});
  return push(std::move(n));
}

Var Graph::softmax_cross_entropy(Var scores, const std::vector<std::size_t>& gold) {
  const Tensor& s = value(scores);
  if (gold.size() != s.rows()) throw DimensionError("softmax_cross_entropy: gold count != rows");
  if (s.rows() == 0 || s.cols() == 0) throw DimensionError("softmax_cross_entropy: empty scores");
  Node n;
  n.op = Op::kSoftmaxCrossEntropy;
  n.inputs = {scores.id};
  n.index = gold;
  n.aux = Tensor(s.rows(), s.cols());  // softmax probabilities
  double total = 0.0;
  for (std::size_t i = 0; i < s.rows(); ++i) {
    if (gold[i] >= s.cols()) {
      throw ContractError("softmax_cross_entropy: gold index " + std::to_string(gold[i]) +
                          " out of range for " + std::to_string(s.cols()) + " candidates");
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < s.cols(); ++j) mx = std::max(mx, s(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < s.cols(); ++j) {
      n.aux(i, j) = std::exp(s(i, j) - mx);
      z += n.aux(i, j);
    }
    for (std::size_t j = 0; j < s.cols(); ++j) n.aux(i, j) /= z;
    total += std::log(z) + mx - s(i, gold[i]);
  }
  n.value = Tensor::scalar(total / static_cast<double>(s.rows()));
  n.requires_grad = needs({scores});
  return push(std::move(n));
}

Var Graph::stack(const std::vector<Var>& scalars, std::size_t rows, std::size_t cols) {
  if (scalars.size() != rows * cols) throw DimensionError("stack: count != rows*cols");
  Node n;
  n.op = Op::kStack;
  n.value = Tensor(rows, cols);
  n.inputs.reserve(scalars.size());
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    n.value[i] = value(scalars[i]).item();
    n.inputs.push_back(scalars[i].id);
    n.requires_grad = n.requires_grad || node(scalars[i]).requires_grad;
  }
  return push(std::move(n));
}

Gradients Graph::backward(Var loss) const {
  const Tensor& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1) throw ContractError("backward: loss must be a scalar");

  std::vector<Tensor> grads(nodes_.size());
  grads[loss.id] = Tensor::scalar(1.0);

  // Adds g into the gradient slot of input node `id`, allocating on demand.
  auto acc = [&](std::size_t id, const Tensor& g) {
    if (!nodes_[id].requires_grad) return;
    if (grads[id].size() == 0) {
      grads[id] = g;
    } else {
      accumulate(grads[id], g);
    }
  };
  auto slot = [&](std::size_t id) -> Tensor* {
    if (!nodes_[id].requires_grad) return nullptr;
    if (grads[id].size() == 0) {
      grads[id] = Tensor(nodes_[id].value.rows(), nodes_[id].value.cols());
    }
    return &grads[id];
  };

  for (std::size_t id = loss.id + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (!n.requires_grad || grads[id].size() == 0 || n.op == Op::kLeaf) continue;
    const Tensor& dy = grads[id];
    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kMatMul: {
        const Tensor& a = nodes_[n.inputs[0]].value;
        const Tensor& b = nodes_[n.inputs[1]].value;
        if (nodes_[n.inputs[0]].requires_grad) acc(n.inputs[0], m3el::matmul_nt(dy, b));
        if (nodes_[n.inputs[1]].requires_grad) acc(n.inputs[1], m3el::matmul_tn(a, dy));
        break;
      }
      case Op::kMatMulNT: {
        const Tensor& a = nodes_[n.inputs[0]].value;
        const Tensor& b = nodes_[n.inputs[1]].value;
        if (nodes_[n.inputs[0]].requires_grad) acc(n.inputs[0], m3el::matmul(dy, b));
        if (nodes_[n.inputs[1]].requires_grad) acc(n.inputs[1], m3el::matmul_tn(dy, a));
        break;
      }
      case Op::kAddBias: {
        acc(n.inputs[0], dy);
        if (Tensor* gb = slot(n.inputs[1])) {
          for (std::size_t i = 0; i < dy.rows(); ++i)
            for (std::size_t j = 0; j < dy.cols(); ++j) (*gb)(0, j) += dy(i, j);
        }
        break;
      }
      case Op::kAdd:
        acc(n.inputs[0], dy);
        acc(n.inputs[1], dy);
        break;
      case Op::kSub:
        acc(n.inputs[0], dy);
        if (Tensor* gb = slot(n.inputs[1])) accumulate_scaled(*gb, dy, -1.0);
        break;
      case Op::kMul: {
        const Tensor& a = nodes_[n.inputs[0]].value;
        const Tensor& b = nodes_[n.inputs[1]].value;
        if (Tensor* ga = slot(n.inputs[0]))
          for (std::size_t i = 0; i < dy.size(); ++i) (*ga)[i] += dy[i] * b[i];
        if (Tensor* gb = slot(n.inputs[1]))
          for (std::size_t i = 0; i < dy.size(); ++i) (*gb)[i] += dy[i] * a[i];
        break;
      }
      case Op::kScale:
        if (Tensor* gx = slot(n.inputs[0])) accumulate_scaled(*gx, dy, n.scalar);
        break;
      case Op::kMulScalar: {
        const double s = nodes_[n.inputs[0]].value.item();
        const Tensor& x = nodes_[n.inputs[1]].value;
        if (Tensor* gs = slot(n.inputs[0])) {
          double t = 0.0;
          for (std::size_t i = 0; i < dy.size(); ++i) t += dy[i] * x[i];
          (*gs)[0] += t;
        }
        if (Tensor* gx = slot(n.inputs[1])) accumulate_scaled(*gx, dy, s);
        break;
      }
      case Op::kRowSoftmax: {
        Tensor* gx = slot(n.inputs[0]);
        if (!gx) break;
        const Tensor& y = n.value;
        for (std::size_t i = 0; i < y.rows(); ++i) {
          double inner = 0.0;
          for (std::size_t j = 0; j < y.cols(); ++j) inner += y(i, j) * dy(i, j);
          for (std::size_t j = 0; j < y.cols(); ++j) (*gx)(i, j) += y(i, j) * (dy(i, j) - inner);
        }
        break;
      }
      case Op::kColSoftmax: {
        Tensor* gx = slot(n.inputs[0]);
        if (!gx) break;
        const Tensor& y = n.value;
        for (std::size_t j = 0; j < y.cols(); ++j) {
          double inner = 0.0;
          for (std::size_t i = 0; i < y.rows(); ++i) inner += y(i, j) * dy(i, j);
          for (std::size_t i = 0; i < y.rows(); ++i) (*gx)(i, j) += y(i, j) * (dy(i, j) - inner);
        }
        break;
      }
      case Op::kRelu: {
        Tensor* gx = slot(n.inputs[0]);
        if (!gx) break;
        for (std::size_t i = 0; i < dy.size(); ++i)
          if (n.aux[i] > 0.0) (*gx)[i] += dy[i];
        break;
      }
      case Op::kTanh: {
        Tensor* gx = slot(n.inputs[0]);
        if (!gx) break;
        for (std::size_t i = 0; i < dy.size(); ++i)
          (*gx)[i] += dy[i] * (1.0 - n.value[i] * n.value[i]);
        break;
      }
      case Op::kExp: {
        Tensor* gx = slot(n.inputs[0]);
        if (!gx) break;
        for (std::size_t i = 0; i < dy.size(); ++i) (*gx)[i] += dy[i] * n.value[i];
        break;
      }
      case Op::kLog: {
        Tensor* gx = slot(n.inputs[0]);
        if (!gx) break;
        const Tensor& x = nodes_[n.inputs[0]].value;
        for (std::size_t i = 0; i < dy.size(); ++i) (*gx)[i] += dy[i] / x[i];
        break;
      }
      case Op::kPool: {
        Tensor* gx = slot(n.inputs[0]);
        if (!gx) break;
        const Tensor& x = nodes_[n.inputs[0]].value;
        switch (n.pooling) {
          case Pooling::kMean:
            for (std::size_t i = 0; i < x.rows(); ++i) {
              if (!valid_at(n.mask, i)) continue;
              for (std::size_t j = 0; j < x.cols(); ++j) (*gx)(i, j) += dy(0, j) / n.scalar;
            }
            break;
          case Pooling::kMax:
            for (std::size_t j = 0; j < x.cols(); ++j) (*gx)(n.index[j], j) += dy(0, j);
            break;
          case Pooling::kSoft:
            // d out_j / d x_ij = w_ij (1 + x_ij - out_j)
            for (std::size_t i = 0; i < x.rows(); ++i) {
              if (!valid_at(n.mask, i)) continue;
              for (std::size_t j = 0; j < x.cols(); ++j) {
                (*gx)(i, j) += dy(0, j) * n.aux(i, j) * (1.0 + x(i, j) - n.value(0, j));
              }
            }
            break;
        }
        break;
      }
      case Op::kConcatRows: {
        const std::size_t top_rows = nodes_[n.inputs[0]].value.rows();
        const std::size_t cols = dy.cols();
        if (Tensor* ga = slot(n.inputs[0]))
          for (std::size_t k = 0; k < top_rows * cols; ++k) (*ga)[k] += dy[k];
        if (Tensor* gb = slot(n.inputs[1]))
          for (std::size_t k = 0; k < gb->size(); ++k) (*gb)[k] += dy[top_rows * cols + k];
        break;
      }
      case Op::kSum: {
        if (Tensor* gx = slot(n.inputs[0]))
          for (auto& v : gx->data()) v += dy[0];
        break;
      }
      case Op::kMean: {
        if (Tensor* gx = slot(n.inputs[0])) {
          const double g = dy[0] / static_cast<double>(gx->size());
          for (auto& v : gx->data()) v += g;
        }
        break;
      }
      case Op::kRowSum: {
        if (Tensor* gx = slot(n.inputs[0]))
          for (std::size_t i = 0; i < gx->rows(); ++i)
            for (std::size_t j = 0; j < gx->cols(); ++j) (*gx)(i, j) += dy(i, 0);
        break;
      }
      case Op::kColSum: {
        if (Tensor* gx = slot(n.inputs[0]))
          for (std::size_t i = 0; i < gx->rows(); ++i)
            for (std::size_t j = 0; j < gx->cols(); ++j) (*gx)(i, j) += dy(0, j);
        break;
      }
      case Op::kCosineMatrix: {
        const Tensor& a = nodes_[n.inputs[0]].value;
        const Tensor& b = nodes_[n.inputs[1]].value;
        const double eps = n.scalar;
        std::vector<double> na(a.rows()), nb(b.rows());
        for (std::size_t i = 0; i < a.rows(); ++i) na[i] = std::sqrt(m3el::dot(a.row_span(i), a.row_span(i)));
        for (std::size_t j = 0; j < b.rows(); ++j) nb[j] = std::sqrt(m3el::dot(b.row_span(j), b.row_span(j)));
        Tensor* ga = slot(n.inputs[0]);
        Tensor* gb = slot(n.inputs[1]);
        const std::size_t d = a.cols();
        for (std::size_t i = 0; i < a.rows(); ++i) {
          for (std::size_t j = 0; j < b.rows(); ++j) {
            const double g = dy(i, j);
            if (g == 0.0) continue;
            const double num = m3el::dot(a.row_span(i), b.row_span(j));
            const double den = na[i] * nb[j] + eps;
            // d/da: b/den - num * nb * (a/|a|) / den^2 ; symmetric for b.
            const double ca = na[i] > 0.0 ? num * nb[j] / (na[i] * den * den) : 0.0;
            const double cb = nb[j] > 0.0 ? num * na[i] / (nb[j] * den * den) : 0.0;
            for (std::size_t k = 0; k < d; ++k) {
              if (ga) (*ga)(i, k) += g * (b(j, k) / den - ca * a(i, k));
              if (gb) (*gb)(j, k) += g * (a(i, k) / den - cb * b(j, k));
            }
          }
        }
        break;
      }
      case Op::kSoftmaxCrossEntropy: {
        Tensor* gx = slot(n.inputs[0]);
        if (!gx) break;
        const double scale = dy[0] / static_cast<double>(n.aux.rows());
        for (std::size_t i = 0; i < n.aux.rows(); ++i) {
          for (std::size_t j = 0; j < n.aux.cols(); ++j) {
            const double target = j == n.index[i] ? 1.0 : 0.0;
            (*gx)(i, j) += scale * (n.aux(i, j) - target);
          }
        }
        break;
      }
      case Op::kStack: {
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          if (Tensor* gs = slot(n.inputs[k])) (*gs)[0] += dy[k];
        }
        break;
      }
    }
  }

  // Reachable-but-untouched and unreachable leaves report zero gradients.
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    if (grads[id].size() == 0 && nodes_[id].requires_grad) {
      grads[id] = Tensor(nodes_[id].value.rows(), nodes_[id].value.cols());
    }
  }
  return Gradients(std::move(grads));
}

}  // namespace m3el::ad
