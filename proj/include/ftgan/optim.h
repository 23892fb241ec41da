// ftgan/optim.h
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

#ifndef FTGAN_OPTIM_H_
#define FTGAN_OPTIM_H_

#include <cstdint>
#include <vector>

#include "ftgan/json_util.h"
#include "ftgan/params.h"

namespace ftgan {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.98;
  double eps = 1e-9;
};

Json to_json(const AdamConfig& c);
AdamConfig adam_config_from_json(const Json& j, const std::string& where);

// Bias-corrected Adam:
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
//   p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
class Adam {
 public:
  Adam(AdamConfig cfg, const ParamSet& params);

  // Uses `lr` in place of cfg.lr (for scheduled learning rates).
  void step(ParamSet& params, const GradSet& grads, double lr);
  void step(ParamSet& params, const GradSet& grads) { step(params, grads, cfg_.lr); }

  const AdamConfig& config() const { return cfg_; }
  int64_t steps() const { return steps_; }
  const std::vector<Matrix>& first_moment() const { return m_; }
  const std::vector<Matrix>& second_moment() const { return v_; }
  void restore(int64_t steps, std::vector<Matrix> m, std::vector<Matrix> v);

 private:
  AdamConfig cfg_;
  int64_t steps_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

// Warmup then inverse-square-root decay:
//   scale * d_att^-0.5 * min(step^-0.5, step * warmup^-1.5)
double lr_schedule(int64_t step, int64_t warmup, int d_att, double scale);

}  // namespace ftgan

#endif  // FTGAN_OPTIM_H_
