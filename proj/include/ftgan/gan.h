// ftgan/gan.h
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
// Transcription critic and WGAN-GP objectives.
//
//   L_D   = lambda_d * (E[D(Y_hat)] - E[D(Y)]) + lambda_gp * gp
//   gp    = E[(||dD/dY_bar||_2 - 1)^2],  Y_bar = g * Y + (1 - g) * Y_hat
//   L_adv = -lambda_d * E[D(Y_hat)]
//
// Expectations are batch means. Sequences are passed unpadded (L_i x V), so
// padded positions never reach the pooling or the penalty norm.

#ifndef FTGAN_GAN_H_
#define FTGAN_GAN_H_

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ftgan/autograd.h"
#include "ftgan/json_util.h"
#include "ftgan/params.h"

namespace ftgan {

struct DiscriminatorConfig {
  int vocab_size = 14;
  int projection_dim = 128;
  int conv_channels = 128;
  int kernel = 2;
  int stride = 1;
  // Per conv layer: "batch" (statistics over every valid step in the
  // batch), "layer" (per step, over channels) or "none".
  std::string norm1 = "batch";
  std::string norm2 = "batch";
  double leaky_slope = 0.2;

  // Shortest sequence that survives both convolutions.
  int min_length() const { return 1 + 2 * (kernel - 1); }
};

void validate(const DiscriminatorConfig& cfg);
Json to_json(const DiscriminatorConfig& cfg);
DiscriminatorConfig discriminator_config_from_json(const Json& j);

struct GanWeights {
  double lambda_d = 1e-4;
  double lambda_gp = 10.0;
};

void validate(const GanWeights& w);
Json to_json(const GanWeights& w);
GanWeights gan_weights_from_json(const Json& j);

// Batch of sequences -> one 1x1 score per sequence.
using Critic = std::function<std::vector<ag::Var>(const std::vector<ag::Var>&)>;

class Discriminator {
 public:
  Discriminator(DiscriminatorConfig cfg, uint64_t seed);
  Discriminator(DiscriminatorConfig cfg, const ParamSet& params);

  const DiscriminatorConfig& config() const { return cfg_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  // projection -> conv -> norm -> leaky ReLU -> conv -> norm -> leaky ReLU
  // -> mean over time -> linear. Throws std::invalid_argument for sequences
  // shorter than min_length().
  std::vector<ag::Var> score(const std::vector<ag::Var>& sequences) const;
  // Single padded sequence; rows at or beyond `valid_length` are ignored.
  double score_padded(const Matrix& padded, int valid_length) const;

  Critic critic() const;

 private:
  ag::Var conv(const std::string& name, const ag::Var& x) const;
  std::vector<ag::Var> normalize(const std::string& name, const std::string& kind,
                                 const std::vector<ag::Var>& xs) const;

  DiscriminatorConfig cfg_;
  ParamSet params_;
};

// g * Y + (1 - g) * Y_hat. Throws std::invalid_argument on shape mismatch or
// g outside [0, 1].
ag::Var interpolate(const ag::Var& real, const ag::Var& fake, double gamma);

// Penalty over interpolates given as plain values; each becomes a fresh leaf
// so the critic's input gradient can be taken, and the result stays
// differentiable with respect to the critic parameters.
ag::Var gradient_penalty(const Critic& critic, const std::vector<Matrix>& interpolates);

struct DiscriminatorLoss {
  ag::Var total;
  double mean_real = 0.0;
  double mean_fake = 0.0;
  double gp = 0.0;
  std::vector<double> gammas;
};

// Y_hat enters as values: no gradient reaches the generator. `gammas` holds
// one draw per item.
DiscriminatorLoss discriminator_loss(const Critic& critic, const std::vector<Matrix>& real,
                                     const std::vector<Matrix>& fake, const GanWeights& w,
                                     const std::vector<double>& gammas);
// Draws gammas ~ U[0, 1] from `rng`.
DiscriminatorLoss discriminator_loss(const Critic& critic, const std::vector<Matrix>& real,
                                     const std::vector<Matrix>& fake, const GanWeights& w,
                                     std::mt19937_64& rng);

struct AdversarialTerm {
  ag::Var term;  // -lambda_d * mean D(Y_hat)
  double mean_score = 0.0;
};

AdversarialTerm generator_adversarial_term(const Critic& critic,
                                           const std::vector<ag::Var>& fake, double lambda_d);

}  // namespace ftgan

#endif  // FTGAN_GAN_H_
