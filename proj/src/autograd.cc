// src/autograd.cc
//
// Copyright 2026 The ftgan Authors
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

#include "ftgan/autograd.h"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace ftgan::ag {

namespace {

thread_local bool g_grad_enabled = true;

[[noreturn]] void shape_error(const char* op, const Var& a, const Var& b) {
  std::ostringstream os;
  os << op << ": shape mismatch " << a.rows() << "x" << a.cols() << " vs "
     << b.rows() << "x" << b.cols();
  throw std::invalid_argument(os.str());
}

void check_same(const char* op, const Var& a, const Var& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error(op, a, b);
}

}  // namespace

const Matrix& Var::value() const {
  if (!node_) throw std::logic_error("Var: access to undefined variable");
  return node_->value;
}

Matrix& Var::mutable_value() {
  if (!node_) throw std::logic_error("Var: access to undefined variable");
  if (node_->backward) throw std::logic_error("Var: only leaves are mutable");
  return node_->value;
}

bool Var::requires_grad() const { return node_ && node_->requires_grad; }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1)
    throw std::invalid_argument("Var::scalar: not a 1x1 value");
  return v(0, 0);
}

Var constant(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var scalar_constant(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

Var parameter(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(std::move(n));
}

Var detach(const Var& v) { return constant(v.value()); }

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var make_op(Matrix value, std::vector<Var> parents, BackwardFn backward) {
  bool needs = false;
  if (g_grad_enabled) {
    for (const Var& p : parents) needs = needs || p.requires_grad();
  }
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  if (needs) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backward = std::move(backward);
  }
  return Var(std::move(n));
}

Var add(const Var& a, const Var& b) {
  check_same("add", a, b);
  return make_op(a.value() + b.value(), {a, b},
                 [](const Var&, const Var& g) { return std::vector<Var>{g, g}; });
}

Var sub(const Var& a, const Var& b) {
  check_same("sub", a, b);
  return make_op(a.value() - b.value(), {a, b}, [](const Var&, const Var& g) {
    return std::vector<Var>{g, neg(g)};
  });
}

Var mul(const Var& a, const Var& b) {
  check_same("mul", a, b);
  return make_op(a.value().cwiseProduct(b.value()), {a, b},
                 [a, b](const Var&, const Var& g) {
                   return std::vector<Var>{mul(g, b), mul(g, a)};
                 });
}

Var neg(const Var& a) {
  return make_op(-a.value(), {a}, [](const Var&, const Var& g) {
    return std::vector<Var>{neg(g)};
  });
}

Var scale(const Var& a, double c) {
  return make_op(a.value() * c, {a}, [c](const Var&, const Var& g) {
    return std::vector<Var>{scale(g, c)};
  });
}

Var add_const(const Var& a, double c) {
  return make_op(a.value().array() + c, {a},
                 [](const Var&, const Var& g) { return std::vector<Var>{g}; });
}

Var exp(const Var& a) {
  // std::exp rather than Eigen's vectorized version, which clamps large
  // negative inputs to a denormal instead of returning 0.
  return make_op(a.value().unaryExpr([](double x) { return std::exp(x); }), {a},
                 [](const Var& out, const Var& g) {
                   return std::vector<Var>{mul(g, out)};
                 });
}

Var log(const Var& a) {
  return make_op(a.value().array().log().matrix(), {a},
                 [a](const Var&, const Var& g) {
                   return std::vector<Var>{mul(g, reciprocal(a))};
                 });
}

Var sqrt(const Var& a) {
  return make_op(a.value().array().sqrt().matrix(), {a},
                 [](const Var& out, const Var& g) {
                   return std::vector<Var>{mul(g, scale(reciprocal(out), 0.5))};
                 });
}

Var reciprocal(const Var& a) {
  return make_op(a.value().array().inverse().matrix(), {a},
                 [](const Var& out, const Var& g) {
                   return std::vector<Var>{neg(mul(g, mul(out, out)))};
                 });
}

Var relu(const Var& a) {
  return make_op(a.value().cwiseMax(0.0), {a}, [a](const Var&, const Var& g) {
    Matrix step = (a.value().array() > 0.0).cast<double>().matrix();
    return std::vector<Var>{mul(g, constant(std::move(step)))};
  });
}

Var leaky_relu(const Var& a, double slope) {
  Matrix out = a.value().unaryExpr([slope](double x) { return x > 0.0 ? x : slope * x; });
  return make_op(std::move(out), {a}, [a, slope](const Var&, const Var& g) {
    Matrix d = a.value().unaryExpr([slope](double x) { return x > 0.0 ? 1.0 : slope; });
    return std::vector<Var>{mul(g, constant(std::move(d)))};
  });
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  return make_op(a.value() * b.value(), {a, b}, [a, b](const Var&, const Var& g) {
    std::vector<Var> out(2);
    if (a.requires_grad()) out[0] = matmul(g, transpose(b));
    if (b.requires_grad()) out[1] = matmul(transpose(a), g);
    return out;
  });
}

Var transpose(const Var& a) {
  return make_op(a.value().transpose(), {a}, [](const Var&, const Var& g) {
    return std::vector<Var>{transpose(g)};
  });
}

Var sum(const Var& a) {
  Matrix s(1, 1);
  s(0, 0) = a.value().sum();
  const Eigen::Index r = a.rows(), c = a.cols();
  return make_op(std::move(s), {a}, [r, c](const Var&, const Var& g) {
    return std::vector<Var>{expand(g, r, c)};
  });
}

Var sum_rows(const Var& a) {
  const Eigen::Index c = a.cols();
  return make_op(a.value().rowwise().sum(), {a}, [c](const Var&, const Var& g) {
    return std::vector<Var>{expand_cols(g, c)};
  });
}

Var sum_cols(const Var& a) {
  const Eigen::Index r = a.rows();
  return make_op(a.value().colwise().sum(), {a}, [r](const Var&, const Var& g) {
    return std::vector<Var>{expand_rows(g, r)};
  });
}

Var expand(const Var& s, Eigen::Index rows, Eigen::Index cols) {
  if (s.rows() != 1 || s.cols() != 1)
    throw std::invalid_argument("expand: expects a 1x1 input");
  return make_op(Matrix::Constant(rows, cols, s.value()(0, 0)), {s},
                 [](const Var&, const Var& g) { return std::vector<Var>{sum(g)}; });
}

Var expand_cols(const Var& col, Eigen::Index cols) {
  if (col.cols() != 1) throw std::invalid_argument("expand_cols: expects n x 1");
  return make_op(col.value().replicate(1, cols), {col},
                 [](const Var&, const Var& g) { return std::vector<Var>{sum_rows(g)}; });
}

Var expand_rows(const Var& row, Eigen::Index rows) {
  if (row.rows() != 1) throw std::invalid_argument("expand_rows: expects 1 x m");
  return make_op(row.value().replicate(rows, 1), {row},
                 [](const Var&, const Var& g) { return std::vector<Var>{sum_cols(g)}; });
}

Var softmax_rows(const Var& a) {
  Matrix y = a.value();
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const double m = y.row(i).maxCoeff();
    y.row(i) = (y.row(i).array() - m).exp();
    y.row(i) /= y.row(i).sum();
  }
  const Eigen::Index c = a.cols();
  return make_op(std::move(y), {a}, [c](const Var& out, const Var& g) {
    Var inner = expand_cols(sum_rows(mul(g, out)), c);
    return std::vector<Var>{mul(out, sub(g, inner))};
  });
}

Var log_softmax_rows(const Var& a) {
  Matrix y = a.value();
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const double m = y.row(i).maxCoeff();
    const double lse = m + std::log((y.row(i).array() - m).exp().sum());
    y.row(i).array() -= lse;
  }
  const Eigen::Index c = a.cols();
  return make_op(std::move(y), {a}, [c](const Var& out, const Var& g) {
    return std::vector<Var>{sub(g, mul(exp(out), expand_cols(sum_rows(g), c)))};
  });
}

Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.value().size())
    throw std::invalid_argument("reshape: element count mismatch");
  Matrix out = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
  const Eigen::Index r = a.rows(), c = a.cols();
  return make_op(std::move(out), {a}, [r, c](const Var&, const Var& g) {
    return std::vector<Var>{reshape(g, r, c)};
  });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows())
    throw std::out_of_range("slice_rows: range outside matrix");
  const Eigen::Index total = a.rows();
  return make_op(a.value().middleRows(start, count), {a},
                 [start, total](const Var&, const Var& g) {
                   return std::vector<Var>{pad_rows(g, start, total)};
                 });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols())
    throw std::out_of_range("slice_cols: range outside matrix");
  const Eigen::Index total = a.cols();
  return make_op(a.value().middleCols(start, count), {a},
                 [start, total](const Var&, const Var& g) {
                   return std::vector<Var>{pad_cols(g, start, total)};
                 });
}

Var pad_rows(const Var& a, Eigen::Index start, Eigen::Index total) {
  Matrix out = Matrix::Zero(total, a.cols());
  out.middleRows(start, a.rows()) = a.value();
  const Eigen::Index count = a.rows();
  return make_op(std::move(out), {a}, [start, count](const Var&, const Var& g) {
    return std::vector<Var>{slice_rows(g, start, count)};
  });
}

Var pad_cols(const Var& a, Eigen::Index start, Eigen::Index total) {
  Matrix out = Matrix::Zero(a.rows(), total);
  out.middleCols(start, a.cols()) = a.value();
  const Eigen::Index count = a.cols();
  return make_op(std::move(out), {a}, [start, count](const Var&, const Var& g) {
    return std::vector<Var>{slice_cols(g, start, count)};
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts.front().cols();
  for (const Var& p : parts) {
    if (p.cols() != cols) shape_error("concat_rows", parts.front(), p);
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    offsets.push_back(at);
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return make_op(std::move(out), parts, [parts, offsets](const Var&, const Var& g) {
    std::vector<Var> grads(parts.size());
    for (size_t i = 0; i < parts.size(); ++i)
      if (parts[i].requires_grad()) grads[i] = slice_rows(g, offsets[i], parts[i].rows());
    return grads;
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  Eigen::Index cols = 0;
  const Eigen::Index rows = parts.front().rows();
  for (const Var& p : parts) {
    if (p.rows() != rows) shape_error("concat_cols", parts.front(), p);
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    offsets.push_back(at);
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return make_op(std::move(out), parts, [parts, offsets](const Var&, const Var& g) {
    std::vector<Var> grads(parts.size());
    for (size_t i = 0; i < parts.size(); ++i)
      if (parts[i].requires_grad()) grads[i] = slice_cols(g, offsets[i], parts[i].cols());
    return grads;
  });
}

Var gather(const Var& a, std::shared_ptr<const std::vector<int>> idx,
           Eigen::Index rows, Eigen::Index cols) {
  if (static_cast<Eigen::Index>(idx->size()) != rows * cols)
    throw std::invalid_argument("gather: index size does not match output shape");
  Matrix out(rows, cols);
  const double* src = a.value().data();
  double* dst = out.data();
  const int limit = static_cast<int>(a.value().size());
  for (size_t i = 0; i < idx->size(); ++i) {
    const int k = (*idx)[i];
    if (k >= limit) throw std::out_of_range("gather: index out of range");
    dst[i] = k < 0 ? 0.0 : src[k];
  }
  const Eigen::Index in_rows = a.rows(), in_cols = a.cols();
  return make_op(std::move(out), {a}, [idx, in_rows, in_cols](const Var&, const Var& g) {
    return std::vector<Var>{scatter_add(g, idx, in_rows, in_cols)};
  });
}

Var scatter_add(const Var& a, std::shared_ptr<const std::vector<int>> idx,
                Eigen::Index rows, Eigen::Index cols) {
  if (static_cast<Eigen::Index>(idx->size()) != a.value().size())
    throw std::invalid_argument("scatter_add: index size does not match input");
  Matrix out = Matrix::Zero(rows, cols);
  const double* src = a.value().data();
  double* dst = out.data();
  for (size_t i = 0; i < idx->size(); ++i) {
    const int k = (*idx)[i];
    if (k >= 0) dst[k] += src[i];
  }
  const Eigen::Index out_rows = a.rows(), out_cols = a.cols();
  return make_op(std::move(out), {a}, [idx, out_rows, out_cols](const Var&, const Var& g) {
    return std::vector<Var>{gather(g, idx, out_rows, out_cols)};
  });
}

Var mean(const Var& a) {
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var square(const Var& a) { return mul(a, a); }

Var add_row_bias(const Var& a, const Var& bias) {
  return add(a, expand_rows(bias, a.rows()));
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  return add_row_bias(matmul(x, weight), bias);
}

Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Eigen::Index n = x.rows(), d = x.cols();
  const double inv_d = 1.0 / static_cast<double>(d);
  Var centered = sub(x, expand_cols(scale(sum_rows(x), inv_d), d));
  Var var = scale(sum_rows(square(centered)), inv_d);
  Var inv_std = reciprocal(sqrt(add_const(var, eps)));
  Var normed = mul(centered, expand_cols(inv_std, d));
  return add(mul(normed, expand_rows(gamma, n)), expand_rows(beta, n));
}

std::vector<Var> grad(const Var& output, const std::vector<Var>& inputs,
                      bool create_graph) {
  if (output.rows() != 1 || output.cols() != 1)
    throw std::invalid_argument("grad: output must be a scalar");
  std::vector<Var> result(inputs.size());
  auto zeros_like = [](const Var& v) {
    return constant(Matrix::Zero(v.rows(), v.cols()));
  };
  if (!output.requires_grad()) {
    for (size_t i = 0; i < inputs.size(); ++i) result[i] = zeros_like(inputs[i]);
    return result;
  }

  // Iterative post-order DFS; reversed it is a valid processing order.
  std::vector<std::shared_ptr<Node>> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<std::shared_ptr<Node>, size_t>> stack;
  stack.emplace_back(output.shared(), 0);
  visited.insert(output.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      const Var& p = node->parents[next++];
      if (p.requires_grad() && visited.insert(p.node()).second)
        stack.emplace_back(p.shared(), 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  std::unordered_map<Node*, Var> grads;
  grads.emplace(output.node(), scalar_constant(1.0));
  {
    const bool previous = g_grad_enabled;
    g_grad_enabled = create_graph;
    try {
      for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = it->get();
        auto found = grads.find(node);
        if (found == grads.end() || !node->backward) continue;
        Var g = found->second;
        std::vector<Var> parent_grads = node->backward(Var(*it), g);
        for (size_t i = 0; i < node->parents.size(); ++i) {
          const Var& p = node->parents[i];
          if (!p.requires_grad() || i >= parent_grads.size() || !parent_grads[i].defined())
            continue;
          auto [slot, inserted] = grads.try_emplace(p.node(), parent_grads[i]);
          if (!inserted) slot->second = add(slot->second, parent_grads[i]);
        }
      }
    } catch (...) {
      g_grad_enabled = previous;
      throw;
    }
    g_grad_enabled = previous;
  }

  for (size_t i = 0; i < inputs.size(); ++i) {
    auto found = inputs[i].defined() ? grads.find(inputs[i].node()) : grads.end();
    result[i] = found == grads.end() ? zeros_like(inputs[i]) : found->second;
  }
  return result;
}

}  // namespace ftgan::ag
