// src/optim.cc
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

#include "ftgan/optim.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ftgan {

Json to_json(const AdamConfig& c) {
  return Json{{"lr", c.lr}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"eps", c.eps}};
}

AdamConfig adam_config_from_json(const Json& j, const std::string& where) {
  check_keys(j, {"lr", "beta1", "beta2", "eps"}, where);
  AdamConfig c;
  read_opt(j, "lr", c.lr, where);
  read_opt(j, "beta1", c.beta1, where);
  read_opt(j, "beta2", c.beta2, where);
  read_opt(j, "eps", c.eps, where);
  if (c.lr < 0 || c.beta1 < 0 || c.beta1 >= 1 || c.beta2 < 0 || c.beta2 >= 1 || c.eps <= 0)
    throw ConfigError(where + ": Adam hyperparameters out of range");
  return c;
}

Adam::Adam(AdamConfig cfg, const ParamSet& params) : cfg_(cfg) {
  m_ = zero_grads(params);
  v_ = zero_grads(params);
}

void Adam::step(ParamSet& params, const GradSet& grads, double lr) {
  if (grads.size() != params.size() || m_.size() != params.size())
    throw std::invalid_argument("Adam::step: gradient count does not match parameters");
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(cfg_.beta1, t);
  const double c2 = 1.0 - std::pow(cfg_.beta2, t);
  for (size_t i = 0; i < params.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grads[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i].cwiseProduct(grads[i]);
    Matrix& p = params.vars()[i].mutable_value();
    p.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + cfg_.eps);
  }
}

void Adam::restore(int64_t steps, std::vector<Matrix> m, std::vector<Matrix> v) {
  if (m.size() != m_.size() || v.size() != v_.size())
    throw std::invalid_argument("Adam::restore: state size mismatch");
  for (size_t i = 0; i < m.size(); ++i)
    if (m[i].rows() != m_[i].rows() || m[i].cols() != m_[i].cols() ||
        v[i].rows() != v_[i].rows() || v[i].cols() != v_[i].cols())
      throw std::invalid_argument("Adam::restore: state shape mismatch");
  steps_ = steps;
  m_ = std::move(m);
  v_ = std::move(v);
}

double lr_schedule(int64_t step, int64_t warmup, int d_att, double scale) {
  if (step < 1) throw std::invalid_argument("lr_schedule: step must be >= 1");
  if (warmup < 1) throw std::invalid_argument("lr_schedule: warmup must be >= 1");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(warmup);
  return scale * std::pow(static_cast<double>(d_att), -0.5) *
         std::min(std::pow(s, -0.5), s * std::pow(w, -1.5));
}

}  // namespace ftgan
