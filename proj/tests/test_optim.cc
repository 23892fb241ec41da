// tests/test_optim.cc
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

#include <cmath>

#include "doctest.h"
#include "ftgan/optim.h"
#include "ftgan/params.h"

namespace ftgan {
namespace {

TEST_CASE("first Adam step on a scalar quadratic") {
  // f(x) = 0.5 * a * x^2, gradient a * x.
  const double a = 3.0, x0 = 2.0;
  ParamSet params;
  params.add("x", Matrix::Constant(1, 1, x0));
  const AdamConfig cfg{0.1, 0.5, 0.98, 1e-9};
  Adam adam(cfg, params);
  GradSet g = {Matrix::Constant(1, 1, a * x0)};
  adam.step(params, g);

  const double grad = a * x0;
  const double m_hat = ((1 - cfg.beta1) * grad) / (1 - cfg.beta1);
  const double v_hat = ((1 - cfg.beta2) * grad * grad) / (1 - cfg.beta2);
  const double expected = x0 - cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  CHECK(params.at("x").value()(0, 0) == doctest::Approx(expected).epsilon(1e-15));
  CHECK(adam.steps() == 1);

  // Second step uses the accumulated moments.
  const double x1 = params.at("x").value()(0, 0);
  g = {Matrix::Constant(1, 1, a * x1)};
  adam.step(params, g, 0.05);
  const double m = cfg.beta1 * (1 - cfg.beta1) * grad + (1 - cfg.beta1) * a * x1;
  const double v = cfg.beta2 * (1 - cfg.beta2) * grad * grad + (1 - cfg.beta2) * a * x1 * a * x1;
  const double mh = m / (1 - cfg.beta1 * cfg.beta1), vh = v / (1 - cfg.beta2 * cfg.beta2);
  CHECK(params.at("x").value()(0, 0) ==
        doctest::Approx(x1 - 0.05 * mh / (std::sqrt(vh) + cfg.eps)).epsilon(1e-14));
}

TEST_CASE("restore reproduces the optimizer trajectory") {
  ParamSet p1;
  p1.add("w", Matrix::Constant(2, 2, 1.0));
  ParamSet p2 = p1.clone();
  Adam a1(AdamConfig{}, p1);
  const GradSet g = {(Matrix(2, 2) << 1, -2, 3, 0.5).finished()};
  a1.step(p1, g);
  p2.assign(p1);
  Adam a2(AdamConfig{}, p2);
  a2.restore(a1.steps(), a1.first_moment(), a1.second_moment());
  a1.step(p1, g);
  a2.step(p2, g);
  CHECK(p1.at("w").value() == p2.at("w").value());
}

TEST_CASE("learning rate schedule") {
  const double scale = 2.0;
  const int d = 64;
  // Peak at warmup, where both branches agree.
  CHECK(lr_schedule(25, 25, d, scale) == doctest::Approx(scale / 8.0 * std::pow(25.0, -0.5)));
  // Linear branch early on.
  CHECK(lr_schedule(1, 4, d, scale) == doctest::Approx(scale / 8.0 * std::pow(4.0, -1.5)));
  for (int s = 1; s < 25; ++s) CHECK(lr_schedule(s, 25, d, scale) < lr_schedule(s + 1, 25, d, scale));
  for (int s = 25; s < 400; ++s)
    CHECK(lr_schedule(s + 1, 25, d, scale) <= lr_schedule(s, 25, d, scale));
  CHECK_THROWS_AS(lr_schedule(0, 25, d, scale), std::invalid_argument);
}

}  // namespace
}  // namespace ftgan
