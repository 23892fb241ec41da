// src/ctc.cc
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

#include "ftgan/ctc.h"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "ftgan/errors.h"
#include "ftgan/shapes.h"

namespace ftgan {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<int> extend_target(const TokenSequence& target, int vocab) {
  std::vector<int> ext(2 * target.size() + 1, kCtcBlank);
  for (size_t i = 0; i < target.size(); ++i) {
    if (target[i] == kCtcBlank || target[i] < 0 || target[i] >= vocab)
      throw std::invalid_argument("ctc: target id " + std::to_string(target[i]) +
                                  " is blank or out of range");
    ext[2 * i + 1] = target[i];
  }
  return ext;
}

void check_feasible(const Matrix& log_probs, const TokenSequence& target) {
  const int need = ctc_min_frames(target);
  if (log_probs.rows() < need || log_probs.rows() == 0)
    throw InfeasibleError("ctc: " + std::to_string(log_probs.rows()) +
                          " frames cannot emit a target needing " + std::to_string(need));
}

bool can_skip(const std::vector<int>& ext, size_t s) {
  return s >= 2 && ext[s] != kCtcBlank && ext[s] != ext[s - 2];
}

}  // namespace

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

CtcTable ctc_forward(const Matrix& log_probs, const TokenSequence& target) {
  check_feasible(log_probs, target);
  const std::vector<int> ext = extend_target(target, static_cast<int>(log_probs.cols()));
  const Eigen::Index T = log_probs.rows();
  const size_t S = ext.size();
  CtcTable table;
  table.log_alpha = Matrix::Constant(T, static_cast<Eigen::Index>(S), kNegInf);
  Matrix& a = table.log_alpha;
  a(0, 0) = log_probs(0, ext[0]);
  if (S > 1) a(0, 1) = log_probs(0, ext[1]);
  for (Eigen::Index t = 1; t < T; ++t) {
    for (size_t s = 0; s < S; ++s) {
      const auto si = static_cast<Eigen::Index>(s);
      double acc = a(t - 1, si);
      if (s >= 1) acc = log_add(acc, a(t - 1, si - 1));
      if (can_skip(ext, s)) acc = log_add(acc, a(t - 1, si - 2));
      a(t, si) = acc == kNegInf ? kNegInf : acc + log_probs(t, ext[s]);
    }
  }
  double ll = a(T - 1, static_cast<Eigen::Index>(S - 1));
  if (S > 1) ll = log_add(ll, a(T - 1, static_cast<Eigen::Index>(S - 2)));
  table.log_likelihood = ll;
  return table;
}

double ctc_nll(const Matrix& log_probs, const TokenSequence& target, Matrix* grad) {
  CtcTable fwd = ctc_forward(log_probs, target);
  const double ll = fwd.log_likelihood;
  if (std::isnan(ll)) {
    // Corrupt posteriors; let the caller's divergence checks see it.
    if (grad) grad->setConstant(log_probs.rows(), log_probs.cols(), ll);
    return ll;
  }
  if (!std::isfinite(ll))
    throw InfeasibleError("ctc: target has zero probability under the posteriors");
  if (grad) {
    const std::vector<int> ext = extend_target(target, static_cast<int>(log_probs.cols()));
    const Eigen::Index T = log_probs.rows();
    const auto S = static_cast<Eigen::Index>(ext.size());
    // log_beta excludes the emission at its own frame.
    Matrix log_beta = Matrix::Constant(T, S, kNegInf);
    log_beta(T - 1, S - 1) = 0.0;
    if (S > 1) log_beta(T - 1, S - 2) = 0.0;
    for (Eigen::Index t = T - 2; t >= 0; --t) {
      for (Eigen::Index s = 0; s < S; ++s) {
        double acc = log_beta(t + 1, s) + log_probs(t + 1, ext[static_cast<size_t>(s)]);
        if (s + 1 < S)
          acc = log_add(acc, log_beta(t + 1, s + 1) +
                                 log_probs(t + 1, ext[static_cast<size_t>(s + 1)]));
        if (s + 2 < S && can_skip(ext, static_cast<size_t>(s + 2)))
          acc = log_add(acc, log_beta(t + 1, s + 2) +
                                 log_probs(t + 1, ext[static_cast<size_t>(s + 2)]));
        log_beta(t, s) = acc;
      }
    }
    grad->setZero(log_probs.rows(), log_probs.cols());
    for (Eigen::Index t = 0; t < T; ++t)
      for (Eigen::Index s = 0; s < S; ++s) {
        const double occ = fwd.log_alpha(t, s) + log_beta(t, s);
        if (occ != kNegInf) (*grad)(t, ext[static_cast<size_t>(s)]) -= std::exp(occ - ll);
      }
  }
  return -ll;
}

double ctc_loss(const Matrix& posteriors, const TokenSequence& target, Matrix* grad) {
  const Matrix log_probs = posteriors.array().log().matrix();
  const double loss = ctc_nll(log_probs, target, grad);
  if (grad) {
    for (Eigen::Index i = 0; i < grad->size(); ++i) {
      const double p = posteriors.data()[i];
      double& g = grad->data()[i];
      g = (g == 0.0) ? 0.0 : g / p;
    }
  }
  return loss;
}

ag::Var ctc_loss_op(const ag::Var& log_probs, const TokenSequence& target) {
  Matrix dlp;
  const double loss = ctc_nll(log_probs.value(), target, log_probs.requires_grad() ? &dlp : nullptr);
  Matrix value(1, 1);
  value(0, 0) = loss;
  auto dconst = std::make_shared<Matrix>(std::move(dlp));
  return ag::make_op(std::move(value), {log_probs}, [dconst](const ag::Var&, const ag::Var& g) {
    return std::vector<ag::Var>{
        ag::mul(ag::expand(g, dconst->rows(), dconst->cols()), ag::constant(*dconst))};
  });
}

TokenSequence ctc_greedy_collapse(const std::vector<int>& path) {
  TokenSequence out;
  int prev = -1;
  for (int p : path) {
    if (p != prev && p != kCtcBlank) out.push_back(p);
    prev = p;
  }
  return out;
}

TokenSequence ctc_greedy_decode(const Matrix& log_probs) {
  std::vector<int> path;
  for (Eigen::Index t = 0; t < log_probs.rows(); ++t) {
    Eigen::Index best = 0;
    log_probs.row(t).maxCoeff(&best);
    path.push_back(static_cast<int>(best));
  }
  return ctc_greedy_collapse(path);
}

CtcPrefixScorer::CtcPrefixScorer(Matrix log_probs) : log_probs_(std::move(log_probs)) {
  if (log_probs_.rows() == 0) throw std::invalid_argument("CtcPrefixScorer: no frames");
}

CtcPrefixScorer::State CtcPrefixScorer::initial() const {
  State s;
  const auto T = static_cast<size_t>(log_probs_.rows());
  s.log_r_nonblank.assign(T, kNegInf);
  s.log_r_blank.assign(T, kNegInf);
  double acc = 0.0;
  for (size_t t = 0; t < T; ++t) {
    acc += log_probs_(static_cast<Eigen::Index>(t), kCtcBlank);
    s.log_r_blank[t] = acc;
  }
  s.score = 0.0;
  return s;
}

CtcPrefixScorer::State CtcPrefixScorer::extend(const State& state, const TokenSequence& prefix,
                                               int token) const {
  if (state.prefix != prefix)
    throw std::invalid_argument("CtcPrefixScorer: state does not belong to this prefix");
  if (token <= kCtcBlank || token >= log_probs_.cols())
    throw std::invalid_argument("CtcPrefixScorer: bad token id");
  const auto T = static_cast<size_t>(log_probs_.rows());
  const int last = prefix.empty() ? -1 : prefix.back();
  const auto col = static_cast<Eigen::Index>(token);

  State next;
  next.prefix = prefix;
  next.prefix.push_back(token);
  next.log_r_nonblank.assign(T, kNegInf);
  next.log_r_blank.assign(T, kNegInf);

  // Probability mass that can be followed by a fresh emission of `token`.
  auto phi = [&](size_t t) {
    return token == last ? state.log_r_blank[t]
                         : log_add(state.log_r_blank[t], state.log_r_nonblank[t]);
  };

  if (prefix.empty()) next.log_r_nonblank[0] = log_probs_(0, col);
  double psi = next.log_r_nonblank[0];
  for (size_t t = 1; t < T; ++t) {
    const auto ti = static_cast<Eigen::Index>(t);
    const double ph = phi(t - 1);
    next.log_r_nonblank[t] = log_add(next.log_r_nonblank[t - 1], ph) + log_probs_(ti, col);
    next.log_r_blank[t] =
        log_add(next.log_r_nonblank[t - 1], next.log_r_blank[t - 1]) + log_probs_(ti, kCtcBlank);
    psi = log_add(psi, ph + log_probs_(ti, col));
  }
  next.score = psi;
  return next;
}

double CtcPrefixScorer::final_score(const State& state) const {
  return log_add(state.log_r_nonblank.back(), state.log_r_blank.back());
}

}  // namespace ftgan
