// tests/test_ctc.cc
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
#include <random>
#include <vector>

#include "doctest.h"
#include "ftgan/ctc.h"
#include "ftgan/errors.h"
#include "ftgan/shapes.h"
#include "oracles.h"
#include "test_util.h"

namespace ftgan {
namespace {

constexpr int kA = 1;
constexpr int kB = 2;

Matrix uniform_posteriors(int T, int V) { return Matrix::Constant(T, V, 1.0 / V); }

TokenSequence random_target(std::mt19937_64& rng, int V, int max_len) {
  std::uniform_int_distribution<int> len(0, max_len), tok(1, V - 1);
  TokenSequence t(static_cast<size_t>(len(rng)));
  for (int& x : t) x = tok(rng);
  return t;
}

TEST_CASE("ctc loss: uniform posteriors over two frames") {
  const double loss = ctc_loss(uniform_posteriors(2, 3), {kA});
  CHECK(loss == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("ctc loss: probability-one path") {
  Matrix p = Matrix::Zero(2, 3);
  p(0, kA) = 1.0;
  p(1, kCtcBlank) = 1.0;
  CHECK(ctc_loss(p, {kA}) == doctest::Approx(0.0));
}

TEST_CASE("ctc loss: repeated label needs a separating blank") {
  CHECK_THROWS_AS(ctc_loss(uniform_posteriors(2, 3), {kA, kA}), InfeasibleError);
  CHECK(std::isfinite(ctc_loss(uniform_posteriors(3, 3), {kA, kA})));
  CHECK_THROWS_AS(ctc_loss(uniform_posteriors(1, 3), {kA, kB}), InfeasibleError);
}

TEST_CASE("nan posteriors propagate instead of raising") {
  Matrix lp = testing::log_softmax(Matrix::Zero(4, 3));
  lp(1, kA) = std::nan("");
  Matrix grad;
  CHECK(std::isnan(ctc_nll(lp, {kA}, &grad)));
  CHECK(grad.array().isNaN().all());
}

TEST_CASE("ctc loss matches path enumeration on random instances") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> frames(1, 6), vocab(2, 4);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int T = frames(rng), V = vocab(rng);
    const Matrix lp = testing::log_softmax(testing::random_matrix(T, V, rng, 3.0));
    const TokenSequence target = random_target(rng, V, 3);
    if (ctc_min_frames(target) > T) {
      CHECK_THROWS_AS(ctc_nll(lp, target), InfeasibleError);
      continue;
    }
    const double expected = -oracle::ctc_log_likelihood(lp, target);
    CHECK(ctc_nll(lp, target) == doctest::Approx(expected).epsilon(1e-9));
    ++checked;
  }
  CHECK(checked > 100);
}

TEST_CASE("ctc loss gradient matches finite differences") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix logits = testing::random_matrix(6, 4, rng, 2.0);
    Matrix p = testing::log_softmax(logits).array().exp().matrix();
    const TokenSequence target = {1 + trial % 3, 1 + (trial + 1) % 3};
    Matrix grad;
    ctc_loss(p, target, &grad);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double h = 1e-6, orig = p.data()[i];
      p.data()[i] = orig + h;
      const double up = ctc_loss(p, target);
      p.data()[i] = orig - h;
      const double down = ctc_loss(p, target);
      p.data()[i] = orig;
      CHECK(testing::relative_error(grad.data()[i], (up - down) / (2 * h), 1e-6) <= 1e-4);
    }
  }
}

TEST_CASE("ctc autograd op agrees with the log-domain gradient") {
  std::mt19937_64 rng(3);
  ag::Var lp = ag::parameter(testing::log_softmax(testing::random_matrix(5, 4, rng)));
  const TokenSequence target = {2, 3};
  ag::Var loss = ctc_loss_op(lp, target);
  Matrix g = ag::grad(loss, {lp})[0].value();
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double fd = testing::central_difference(lp, i, [&] { return ctc_nll(lp.value(), target); });
    CHECK(testing::relative_error(g.data()[i], fd, 1e-6) <= 1e-5);
  }
}

TEST_CASE("ctc forward table is bounded and banded") {
  std::mt19937_64 rng(5);
  const Matrix lp = testing::log_softmax(testing::random_matrix(6, 4, rng));
  const CtcTable tab = ctc_forward(lp, {1, 2});
  CHECK(tab.log_alpha.cols() == 5);
  CHECK((tab.log_alpha.array() <= 0.0).all());
  // Frame 0 can only sit on the leading blank or the first label.
  for (Eigen::Index s = 2; s < 5; ++s) CHECK(std::isinf(tab.log_alpha(0, s)));
}

TEST_CASE("greedy collapse") {
  CHECK(ctc_greedy_collapse({kA, kA, kCtcBlank, kB}) == TokenSequence{kA, kB});
  CHECK(ctc_greedy_collapse({kCtcBlank, kCtcBlank}).empty());
  CHECK(ctc_greedy_collapse({kA, kCtcBlank, kA}) == TokenSequence{kA, kA});
}

TEST_CASE("minimum frames never grows with extra frames") {
  for (int T = 1; T < 6; ++T) {
    const Matrix lp = testing::log_softmax(Matrix::Zero(T, 3));
    for (const TokenSequence& t : {TokenSequence{1}, TokenSequence{1, 1}, TokenSequence{1, 2, 1}}) {
      const bool feasible = ctc_min_frames(t) <= T;
      const Matrix more = testing::log_softmax(Matrix::Zero(T + 1, 3));
      if (feasible) CHECK(std::isfinite(ctc_nll(more, t)));
    }
  }
}

TEST_CASE("prefix scorer: incremental equals from scratch and matches enumeration") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const int T = 5, V = 4;
    const Matrix lp = testing::log_softmax(testing::random_matrix(T, V, rng, 2.0));
    const TokenSequence hyp = random_target(rng, V, 3);
    CtcPrefixScorer scorer(lp);
    CtcPrefixScorer::State state = scorer.initial();
    TokenSequence prefix;
    for (int tok : hyp) {
      CtcPrefixScorer::State next = scorer.extend(state, prefix, tok);
      // Rebuild the same prefix without reusing any cached state.
      CtcPrefixScorer::State fresh = scorer.initial();
      TokenSequence p2;
      for (int t2 : prefix) {
        fresh = scorer.extend(fresh, p2, t2);
        p2.push_back(t2);
      }
      fresh = scorer.extend(fresh, p2, tok);
      CHECK(next.score == doctest::Approx(fresh.score).epsilon(1e-12));
      prefix.push_back(tok);
      CHECK(next.score == doctest::Approx(oracle::ctc_prefix_log_prob(lp, prefix)).epsilon(1e-9));
      state = next;
    }
    if (ctc_min_frames(hyp) <= T)
      CHECK(scorer.final_score(state) == doctest::Approx(-ctc_nll(lp, hyp)).epsilon(1e-9));
  }
}

TEST_CASE("prefix scorer: first extension over a two-symbol alphabet") {
  // Blank and one label, three frames: the prefix "a" has every path but the
  // all-blank one.
  Matrix p(3, 2);
  p << 0.6, 0.4, 0.3, 0.7, 0.9, 0.1;
  const Matrix lp = p.array().log().matrix();
  CtcPrefixScorer scorer(lp);
  const auto s = scorer.extend(scorer.initial(), {}, 1);
  CHECK(s.score == doctest::Approx(std::log(1.0 - 0.6 * 0.3 * 0.9)).epsilon(1e-12));
}

TEST_CASE("prefix scorer rejects stale state and bad tokens") {
  CtcPrefixScorer scorer(testing::log_softmax(Matrix::Zero(4, 3)));
  const auto s = scorer.extend(scorer.initial(), {}, 1);
  CHECK_THROWS_AS(scorer.extend(s, {2}, 1), std::invalid_argument);
  CHECK_THROWS_AS(scorer.extend(s, {1}, kCtcBlank), std::invalid_argument);
  CHECK_THROWS_AS(scorer.extend(s, {1}, 3), std::invalid_argument);
}

}  // namespace
}  // namespace ftgan
