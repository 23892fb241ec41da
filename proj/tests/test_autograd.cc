// tests/test_autograd.cc
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

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "doctest.h"
#include "ftgan/autograd.h"
#include "test_util.h"

namespace ftgan {
namespace {

using ag::Var;
using testing::central_difference;
using testing::random_matrix;
using testing::relative_error;

// Checks d/dx sum(w * f(x...)) against central differences for every entry
// of every input.
void check_op(const std::string& name, std::vector<Matrix> inputs,
              const std::function<Var(const std::vector<Var>&)>& f, uint64_t seed = 7) {
  CAPTURE(name);
  std::vector<Var> leaves;
  for (auto& m : inputs) leaves.push_back(ag::parameter(m));
  auto rng = make_rng({seed});
  const Matrix w = random_matrix(f(leaves).rows(), f(leaves).cols(), rng);
  auto loss = [&] { return ag::sum(ag::mul(f(leaves), ag::constant(w))); };
  const std::vector<Var> g = ag::grad(loss(), leaves);
  auto value = [&] {
    ag::NoGradGuard no_grad;
    return loss().scalar();
  };
  for (size_t k = 0; k < leaves.size(); ++k) {
    for (Eigen::Index i = 0; i < leaves[k].value().size(); ++i) {
      const double fd = central_difference(leaves[k], i, value);
      CHECK(relative_error(g[k].value().data()[i], fd, 1e-6) < 1e-6);
    }
  }
}

Matrix positive(Eigen::Index r, Eigen::Index c, uint64_t seed) {
  auto rng = make_rng({seed});
  Matrix m = random_matrix(r, c, rng);
  return m.array().abs() + 0.5;
}

Matrix mixed(Eigen::Index r, Eigen::Index c, uint64_t seed) {
  auto rng = make_rng({seed});
  Matrix m = random_matrix(r, c, rng);
  // Keep entries away from the ReLU kink.
  for (Eigen::Index i = 0; i < m.size(); ++i)
    if (std::abs(m.data()[i]) < 0.1) m.data()[i] += 0.3;
  return m;
}

TEST_CASE("elementwise ops match central differences") {
  const Matrix a = mixed(3, 4, 1), b = mixed(3, 4, 2), p = positive(3, 4, 3);
  check_op("add", {a, b}, [](auto& v) { return ag::add(v[0], v[1]); });
  check_op("sub", {a, b}, [](auto& v) { return ag::sub(v[0], v[1]); });
  check_op("mul", {a, b}, [](auto& v) { return ag::mul(v[0], v[1]); });
  check_op("neg", {a}, [](auto& v) { return ag::neg(v[0]); });
  check_op("scale", {a}, [](auto& v) { return ag::scale(v[0], -2.5); });
  check_op("add_const", {a}, [](auto& v) { return ag::add_const(v[0], 3.0); });
  check_op("exp", {a}, [](auto& v) { return ag::exp(v[0]); });
  check_op("log", {p}, [](auto& v) { return ag::log(v[0]); });
  check_op("sqrt", {p}, [](auto& v) { return ag::sqrt(v[0]); });
  check_op("reciprocal", {p}, [](auto& v) { return ag::reciprocal(v[0]); });
  check_op("relu", {a}, [](auto& v) { return ag::relu(v[0]); });
  check_op("leaky_relu", {a}, [](auto& v) { return ag::leaky_relu(v[0], 0.2); });
  check_op("square", {a}, [](auto& v) { return ag::square(v[0]); });
}

TEST_CASE("matrix, reduction and shape ops match central differences") {
  const Matrix a = mixed(3, 4, 4), b = mixed(4, 2, 5);
  check_op("matmul", {a, b}, [](auto& v) { return ag::matmul(v[0], v[1]); });
  check_op("transpose", {a}, [](auto& v) { return ag::transpose(v[0]); });
  check_op("sum", {a}, [](auto& v) { return ag::sum(v[0]); });
  check_op("mean", {a}, [](auto& v) { return ag::mean(v[0]); });
  check_op("sum_rows", {a}, [](auto& v) { return ag::sum_rows(v[0]); });
  check_op("sum_cols", {a}, [](auto& v) { return ag::sum_cols(v[0]); });
  check_op("expand", {mixed(1, 1, 6)}, [](auto& v) { return ag::expand(v[0], 2, 3); });
  check_op("expand_cols", {mixed(3, 1, 7)}, [](auto& v) { return ag::expand_cols(v[0], 4); });
  check_op("expand_rows", {mixed(1, 4, 8)}, [](auto& v) { return ag::expand_rows(v[0], 3); });
  check_op("softmax_rows", {a}, [](auto& v) { return ag::softmax_rows(v[0]); });
  check_op("log_softmax_rows", {a}, [](auto& v) { return ag::log_softmax_rows(v[0]); });
  check_op("reshape", {a}, [](auto& v) { return ag::reshape(v[0], 6, 2); });
  check_op("slice_rows", {a}, [](auto& v) { return ag::slice_rows(v[0], 1, 2); });
  check_op("slice_cols", {a}, [](auto& v) { return ag::slice_cols(v[0], 1, 2); });
  check_op("pad_rows", {a}, [](auto& v) { return ag::pad_rows(v[0], 1, 6); });
  check_op("pad_cols", {a}, [](auto& v) { return ag::pad_cols(v[0], 2, 7); });
  check_op("concat_rows", {a, mixed(2, 4, 9)},
           [](auto& v) { return ag::concat_rows({v[0], v[1]}); });
  check_op("concat_cols", {a, mixed(3, 1, 10)},
           [](auto& v) { return ag::concat_cols({v[0], v[1]}); });
  check_op("add_row_bias", {a, mixed(1, 4, 11)},
           [](auto& v) { return ag::add_row_bias(v[0], v[1]); });
  check_op("linear", {a, b, mixed(1, 2, 12)},
           [](auto& v) { return ag::linear(v[0], v[1], v[2]); });
  check_op("layer_norm_rows", {a, mixed(1, 4, 13), mixed(1, 4, 14)},
           [](auto& v) { return ag::layer_norm_rows(v[0], v[1], v[2], 1e-5); });
  auto idx = std::make_shared<const std::vector<int>>(std::vector<int>{0, 5, -1, 11, 5, 2});
  check_op("gather", {a}, [idx](auto& v) { return ag::gather(v[0], idx, 2, 3); });
  check_op("scatter_add", {mixed(2, 3, 15)},
           [idx](auto& v) { return ag::scatter_add(v[0], idx, 3, 4); });
}

TEST_CASE("gather and scatter_add are adjoint") {
  auto rng = make_rng({3});
  const Matrix a = random_matrix(4, 5, rng), b = random_matrix(3, 3, rng);
  auto idx = std::make_shared<const std::vector<int>>(
      std::vector<int>{0, 19, 7, -1, 7, 3, 12, 12, 0});
  const Matrix g = ag::gather(ag::constant(a), idx, 3, 3).value();
  const Matrix s = ag::scatter_add(ag::constant(b), idx, 4, 5).value();
  CHECK(g.cwiseProduct(b).sum() == doctest::Approx(a.cwiseProduct(s).sum()).epsilon(1e-12));
  CHECK(g(1, 0) == 0.0);  // negative index
}

TEST_CASE("second-order gradients match differences of first-order gradients") {
  // f(w) = sum((d/dx g(x, w))^2) needs the backward pass to be differentiable.
  auto rng = make_rng({21});
  Var x = ag::parameter(random_matrix(3, 4, rng));
  Var w = ag::parameter(random_matrix(4, 2, rng));
  const Matrix c = random_matrix(3, 2, rng);
  auto g_of = [&](const Var& xv) {
    Var h = ag::leaky_relu(ag::matmul(ag::exp(ag::scale(xv, 0.5)), w), 0.2);
    return ag::sum(ag::mul(ag::softmax_rows(h), ag::constant(c)));
  };
  auto f = [&]() {
    Var dx = ag::grad(g_of(x), {x}, true)[0];
    return ag::sum(ag::square(dx));
  };
  const std::vector<Var> analytic = ag::grad(f(), {w, x});
  auto value = [&] { return f().scalar(); };
  for (Eigen::Index i = 0; i < w.value().size(); ++i)
    CHECK(relative_error(analytic[0].value().data()[i], central_difference(w, i, value), 1e-6) <
          1e-5);
  for (Eigen::Index i = 0; i < x.value().size(); ++i)
    CHECK(relative_error(analytic[1].value().data()[i], central_difference(x, i, value), 1e-6) <
          1e-5);
}

TEST_CASE("graph bookkeeping") {
  Var a = ag::parameter(Matrix::Ones(2, 2));
  Var b = ag::parameter(Matrix::Ones(2, 2));

  SUBCASE("no-grad mode records nothing") {
    ag::NoGradGuard guard;
    CHECK_FALSE(ag::grad_enabled());
    CHECK_FALSE(ag::mul(a, b).requires_grad());
  }
  SUBCASE("unreachable inputs receive zeros") {
    const auto g = ag::grad(ag::sum(a), {a, b});
    CHECK(g[0].value() == Matrix::Ones(2, 2));
    CHECK(g[1].value() == Matrix::Zero(2, 2));
  }
  SUBCASE("shared subexpressions accumulate") {
    Var s = ag::sum(a);
    const auto g = ag::grad(ag::add(ag::mul(s, s), s), {a});
    CHECK(g[0].value()(0, 0) == doctest::Approx(2 * 4.0 + 1));
  }
  SUBCASE("shape errors and leaf mutation") {
    CHECK_THROWS_AS(ag::add(a, ag::constant(Matrix::Ones(2, 3))), std::invalid_argument);
    CHECK_THROWS_AS(ag::matmul(a, ag::constant(Matrix::Ones(3, 1))), std::invalid_argument);
    Var c = ag::add(a, b);
    CHECK_THROWS_AS(c.mutable_value(), std::logic_error);
    CHECK_THROWS_AS(c.scalar(), std::invalid_argument);
  }
  CHECK(ag::grad_enabled());
}

}  // namespace
}  // namespace ftgan
