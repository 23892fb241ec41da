// ftgan/autograd.h
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
//
// Reverse-mode automatic differentiation over dense double matrices.
//
// Every backward rule is itself written in terms of the differentiable ops
// below, so calling grad() with create_graph = true yields gradients that
// can be differentiated again. The WGAN-GP penalty relies on this: its value
// is a function of dD/dY, and its parameter gradient is second order.
//
// Scalars are 1x1 matrices. All shapes are checked eagerly and mismatches
// throw std::invalid_argument.

#ifndef FTGAN_AUTOGRAD_H_
#define FTGAN_AUTOGRAD_H_

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <vector>

namespace ftgan::ag {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Var;
struct Node;

// Given the node's own output and the incoming gradient, returns one
// gradient per parent (an undefined Var means "no contribution").
using BackwardFn = std::function<std::vector<Var>(const Var& out, const Var& grad)>;

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const { return node_ != nullptr; }
  const Matrix& value() const;
  // Only leaves may be mutated; used by optimizers and finite-difference checks.
  Matrix& mutable_value();
  bool requires_grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;
  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

struct Node {
  Matrix value;
  bool requires_grad = false;
  std::vector<Var> parents;
  BackwardFn backward;
};

// Leaves.
Var constant(Matrix value);
Var scalar_constant(double v);
Var parameter(Matrix value);
Var detach(const Var& v);

// Graph recording. When disabled every op returns a constant.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Builds a node from a forward value and a backward rule. Exposed for ops
// that live outside this file (the CTC loss).
Var make_op(Matrix value, std::vector<Var> parents, BackwardFn backward);

// Elementwise, same shape.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, double c);
Var add_const(const Var& a, double c);
Var exp(const Var& a);
Var log(const Var& a);
Var sqrt(const Var& a);
Var reciprocal(const Var& a);
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

// Reductions and their broadcasting duals.
Var sum(const Var& a);                               // -> 1x1
Var sum_rows(const Var& a);                          // n x m -> n x 1
Var sum_cols(const Var& a);                          // n x m -> 1 x m
Var expand(const Var& s, Eigen::Index rows, Eigen::Index cols);  // 1x1 -> r x c
Var expand_cols(const Var& col, Eigen::Index cols);  // n x 1 -> n x cols
Var expand_rows(const Var& row, Eigen::Index rows);  // 1 x m -> rows x m

Var softmax_rows(const Var& a);
Var log_softmax_rows(const Var& a);

// Reinterprets the row-major buffer with a new shape.
Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols);

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var pad_rows(const Var& a, Eigen::Index start, Eigen::Index total);
Var pad_cols(const Var& a, Eigen::Index start, Eigen::Index total);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);

// out(i, j) = a(index / a.cols, index % a.cols) for index = idx[i * cols + j],
// or 0 when the index is negative.
Var gather(const Var& a, std::shared_ptr<const std::vector<int>> idx,
           Eigen::Index rows, Eigen::Index cols);
// Adjoint of gather: accumulates a's entries into a rows x cols zero matrix.
Var scatter_add(const Var& a, std::shared_ptr<const std::vector<int>> idx,
                Eigen::Index rows, Eigen::Index cols);

// Composites.
Var mean(const Var& a);
Var square(const Var& a);
Var add_row_bias(const Var& a, const Var& bias);
Var linear(const Var& x, const Var& weight, const Var& bias);
Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps);

// Gradients of a scalar output with respect to `inputs`. Inputs that do not
// influence the output receive zero matrices. With create_graph the returned
// gradients are themselves differentiable.
std::vector<Var> grad(const Var& output, const std::vector<Var>& inputs,
                      bool create_graph = false);

}  // namespace ftgan::ag

#endif  // FTGAN_AUTOGRAD_H_
