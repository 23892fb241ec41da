// src/gan.cc
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

#include "ftgan/gan.h"

#include <cmath>
#include <stdexcept>

#include "ftgan/errors.h"

namespace ftgan {

namespace {

constexpr double kNormEps = 1e-5;

Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, double fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(fan_in);
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

bool known_norm(const std::string& kind) {
  return kind == "batch" || kind == "layer" || kind == "none";
}

}  // namespace

void validate(const DiscriminatorConfig& c) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("discriminator: " + what);
  };
  require(c.vocab_size > 0 && c.projection_dim > 0 && c.conv_channels > 0,
          "widths must be positive");
  require(c.kernel >= 1, "kernel must be at least 1");
  require(c.stride == 1, "only stride 1 is supported");
  require(known_norm(c.norm1) && known_norm(c.norm2), "norm must be batch, layer or none");
  require(c.leaky_slope >= 0.0, "leaky_slope must be non-negative");
}

Json to_json(const DiscriminatorConfig& c) {
  return Json{{"vocab_size", c.vocab_size},   {"projection_dim", c.projection_dim},
              {"conv_channels", c.conv_channels}, {"kernel", c.kernel},
              {"stride", c.stride},           {"norm1", c.norm1},
              {"norm2", c.norm2},             {"leaky_slope", c.leaky_slope}};
}

DiscriminatorConfig discriminator_config_from_json(const Json& j) {
  const std::string where = "discriminator";
  check_keys(j,
             {"vocab_size", "projection_dim", "conv_channels", "kernel", "stride", "norm1",
              "norm2", "leaky_slope"},
             where);
  DiscriminatorConfig c;
  read_opt(j, "vocab_size", c.vocab_size, where);
  read_opt(j, "projection_dim", c.projection_dim, where);
  read_opt(j, "conv_channels", c.conv_channels, where);
  read_opt(j, "kernel", c.kernel, where);
  read_opt(j, "stride", c.stride, where);
  read_opt(j, "norm1", c.norm1, where);
  read_opt(j, "norm2", c.norm2, where);
  read_opt(j, "leaky_slope", c.leaky_slope, where);
  return c;
}

void validate(const GanWeights& w) {
  if (!(w.lambda_d >= 0.0)) throw ConfigError("gan: lambda_d must be non-negative");
  if (!(w.lambda_gp >= 0.0)) throw ConfigError("gan: lambda_gp must be non-negative");
}

Json to_json(const GanWeights& w) {
  return Json{{"lambda_d", w.lambda_d}, {"lambda_gp", w.lambda_gp}};
}

GanWeights gan_weights_from_json(const Json& j) {
  check_keys(j, {"lambda_d", "lambda_gp"}, "gan");
  GanWeights w;
  read_opt(j, "lambda_d", w.lambda_d, "gan");
  read_opt(j, "lambda_gp", w.lambda_gp, "gan");
  return w;
}

Discriminator::Discriminator(DiscriminatorConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
  validate(cfg_);
  std::mt19937_64 rng = make_rng({seed, 0x63726974ULL});
  const int V = cfg_.vocab_size, P = cfg_.projection_dim, C = cfg_.conv_channels, k = cfg_.kernel;
  params_.add("proj.w", uniform_init(V, P, V, rng));
  params_.add("proj.b", uniform_init(1, P, V, rng));
  params_.add("conv1.w", uniform_init(k * P, C, k * P, rng));
  params_.add("conv1.b", uniform_init(1, C, k * P, rng));
  params_.add("norm1.g", Matrix::Ones(1, C));
  params_.add("norm1.b", Matrix::Zero(1, C));
  params_.add("conv2.w", uniform_init(k * C, C, k * C, rng));
  params_.add("conv2.b", uniform_init(1, C, k * C, rng));
  params_.add("norm2.g", Matrix::Ones(1, C));
  params_.add("norm2.b", Matrix::Zero(1, C));
  params_.add("head.w", uniform_init(C, 1, C, rng));
  params_.add("head.b", uniform_init(1, 1, C, rng));
}

Discriminator::Discriminator(DiscriminatorConfig cfg, const ParamSet& params)
    : Discriminator(std::move(cfg), 0) {
  params_.assign(params);
}

ag::Var Discriminator::conv(const std::string& name, const ag::Var& x) const {
  const int k = cfg_.kernel;
  const Eigen::Index n = x.rows() - k + 1;
  std::vector<ag::Var> taps;
  for (int j = 0; j < k; ++j) taps.push_back(ag::slice_rows(x, j, n));
  ag::Var stacked = k == 1 ? taps.front() : ag::concat_cols(taps);
  return ag::linear(stacked, params_.at(name + ".w"), params_.at(name + ".b"));
}

std::vector<ag::Var> Discriminator::normalize(const std::string& name, const std::string& kind,
                                              const std::vector<ag::Var>& xs) const {
  const ag::Var& gamma = params_.at(name + ".g");
  const ag::Var& beta = params_.at(name + ".b");
  std::vector<ag::Var> out;
  if (kind == "none") return xs;
  if (kind == "layer") {
    for (const auto& x : xs) out.push_back(ag::layer_norm_rows(x, gamma, beta, kNormEps));
    return out;
  }
  // Batch statistics over every valid step of every item.
  ag::Var all = xs.size() == 1 ? xs.front() : ag::concat_rows(xs);
  const Eigen::Index n = all.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  ag::Var mean = ag::scale(ag::sum_cols(all), inv_n);
  ag::Var centered = ag::sub(all, ag::expand_rows(mean, n));
  ag::Var var = ag::scale(ag::sum_cols(ag::square(centered)), inv_n);
  ag::Var inv_std = ag::reciprocal(ag::sqrt(ag::add_const(var, kNormEps)));
  ag::Var normed = ag::mul(centered, ag::expand_rows(inv_std, n));
  normed = ag::add(ag::mul(normed, ag::expand_rows(gamma, n)), ag::expand_rows(beta, n));
  Eigen::Index at = 0;
  for (const auto& x : xs) {
    out.push_back(ag::slice_rows(normed, at, x.rows()));
    at += x.rows();
  }
  return out;
}

std::vector<ag::Var> Discriminator::score(const std::vector<ag::Var>& sequences) const {
  if (sequences.empty()) return {};
  std::vector<ag::Var> h;
  for (const auto& y : sequences) {
    if (y.cols() != cfg_.vocab_size)
      throw std::invalid_argument("Discriminator: input width does not match vocab_size");
    if (y.rows() < cfg_.min_length())
      throw std::invalid_argument("Discriminator: sequence of length " +
                                  std::to_string(y.rows()) + " is shorter than " +
                                  std::to_string(cfg_.min_length()));
    ag::Var proj = ag::linear(y, params_.at("proj.w"), params_.at("proj.b"));
    h.push_back(conv("conv1", proj));
  }
  h = normalize("norm1", cfg_.norm1, h);
  for (auto& x : h) x = conv("conv2", ag::leaky_relu(x, cfg_.leaky_slope));
  h = normalize("norm2", cfg_.norm2, h);
  std::vector<ag::Var> scores;
  for (auto& x : h) {
    ag::Var act = ag::leaky_relu(x, cfg_.leaky_slope);
    ag::Var pooled = ag::scale(ag::sum_cols(act), 1.0 / static_cast<double>(act.rows()));
    scores.push_back(ag::linear(pooled, params_.at("head.w"), params_.at("head.b")));
  }
  return scores;
}

double Discriminator::score_padded(const Matrix& padded, int valid_length) const {
  if (valid_length < cfg_.min_length() || valid_length > padded.rows())
    throw std::invalid_argument("Discriminator: valid_length " + std::to_string(valid_length) +
                                " outside [" + std::to_string(cfg_.min_length()) + ", rows]");
  ag::NoGradGuard no_grad;
  return score({ag::constant(padded.topRows(valid_length))}).front().scalar();
}

Critic Discriminator::critic() const {
  return [this](const std::vector<ag::Var>& xs) { return score(xs); };
}

ag::Var interpolate(const ag::Var& real, const ag::Var& fake, double gamma) {
  if (real.rows() != fake.rows() || real.cols() != fake.cols())
    throw std::invalid_argument("interpolate: real and generated shapes differ");
  if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("interpolate: gamma outside [0, 1]");
  return ag::add(ag::scale(real, gamma), ag::scale(fake, 1.0 - gamma));
}

ag::Var gradient_penalty(const Critic& critic, const std::vector<Matrix>& interpolates) {
  if (interpolates.empty()) throw std::invalid_argument("gradient_penalty: empty batch");
  std::vector<ag::Var> leaves;
  for (const auto& m : interpolates) leaves.push_back(ag::parameter(m));
  std::vector<ag::Var> scores = critic(leaves);
  ag::Var total = ag::sum(ag::concat_rows(scores));
  std::vector<ag::Var> grads = ag::grad(total, leaves, /*create_graph=*/true);
  std::vector<ag::Var> terms;
  for (const auto& g : grads) {
    ag::Var sq = ag::sum(ag::square(g));
    // The norm's derivative is undefined at zero; a zero gradient has no
    // direction to push, so treat the norm as a constant there.
    ag::Var norm = sq.scalar() > 0.0 ? ag::sqrt(sq) : ag::scalar_constant(0.0);
    terms.push_back(ag::square(ag::add_const(norm, -1.0)));
  }
  return ag::scale(ag::sum(ag::concat_rows(terms)), 1.0 / static_cast<double>(terms.size()));
}

DiscriminatorLoss discriminator_loss(const Critic& critic, const std::vector<Matrix>& real,
                                     const std::vector<Matrix>& fake, const GanWeights& w,
                                     const std::vector<double>& gammas) {
  if (real.size() != fake.size() || real.size() != gammas.size() || real.empty())
    throw std::invalid_argument("discriminator_loss: batch sizes differ or are empty");
  std::vector<ag::Var> real_vars, fake_vars;
  std::vector<Matrix> mixed;
  for (size_t i = 0; i < real.size(); ++i) {
    real_vars.push_back(ag::constant(real[i]));
    fake_vars.push_back(ag::constant(fake[i]));
    ag::NoGradGuard no_grad;
    mixed.push_back(interpolate(real_vars.back(), fake_vars.back(), gammas[i]).value());
  }
  const double inv_m = 1.0 / static_cast<double>(real.size());
  ag::Var mean_real = ag::scale(ag::sum(ag::concat_rows(critic(real_vars))), inv_m);
  ag::Var mean_fake = ag::scale(ag::sum(ag::concat_rows(critic(fake_vars))), inv_m);
  ag::Var gp = gradient_penalty(critic, mixed);

  DiscriminatorLoss out;
  out.total = ag::add(ag::scale(ag::sub(mean_fake, mean_real), w.lambda_d),
                      ag::scale(gp, w.lambda_gp));
  out.mean_real = mean_real.scalar();
  out.mean_fake = mean_fake.scalar();
  out.gp = gp.scalar();
  out.gammas = gammas;
  return out;
}

DiscriminatorLoss discriminator_loss(const Critic& critic, const std::vector<Matrix>& real,
                                     const std::vector<Matrix>& fake, const GanWeights& w,
                                     std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> gammas;
  for (size_t i = 0; i < real.size(); ++i) gammas.push_back(u(rng));
  return discriminator_loss(critic, real, fake, w, gammas);
}

AdversarialTerm generator_adversarial_term(const Critic& critic,
                                           const std::vector<ag::Var>& fake, double lambda_d) {
  if (fake.empty()) throw std::invalid_argument("generator_adversarial_term: empty batch");
  ag::Var mean = ag::scale(ag::sum(ag::concat_rows(critic(fake))),
                           1.0 / static_cast<double>(fake.size()));
  AdversarialTerm out;
  out.mean_score = mean.scalar();
  out.term = ag::scale(mean, -lambda_d);
  return out;
}

}  // namespace ftgan
