// ftgan/ctc.h
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
// Connectionist temporal classification over log-domain frame posteriors.
// Blank is id 0 everywhere.

#ifndef FTGAN_CTC_H_
#define FTGAN_CTC_H_

#include <vector>

#include "ftgan/autograd.h"
#include "ftgan/corpus.h"

namespace ftgan {

inline constexpr int kCtcBlank = Vocab::kBlank;

// Forward variables over (frame, extended-target position). The extended
// target interleaves blanks: blank, y1, blank, y2, ..., yL, blank.
struct CtcTable {
  Matrix log_alpha;  // frames x (2L + 1); -inf outside the reachable band
  double log_likelihood = 0.0;
};

// Throws InfeasibleError when the target cannot be emitted in the available
// frames, std::invalid_argument when it contains a blank or bad id.
CtcTable ctc_forward(const Matrix& log_probs, const TokenSequence& target);

// -log P(target | frames) from log posteriors. When `grad` is non-null it
// receives d(loss)/d(log_probs), computed with the backward recursion.
double ctc_nll(const Matrix& log_probs, const TokenSequence& target, Matrix* grad = nullptr);

// Same quantity from probability-domain posteriors; `grad` is then with
// respect to the posteriors themselves.
double ctc_loss(const Matrix& posteriors, const TokenSequence& target, Matrix* grad = nullptr);

// Differentiable -log P over a log-posterior variable (first order only).
ag::Var ctc_loss_op(const ag::Var& log_probs, const TokenSequence& target);

// Merge adjacent repeats, then drop blanks.
TokenSequence ctc_greedy_collapse(const std::vector<int>& path);
// Frame-wise argmax followed by ctc_greedy_collapse.
TokenSequence ctc_greedy_decode(const Matrix& log_probs);

// Incremental prefix probabilities for joint CTC/attention search.
//
// For a prefix h, score(h) = log of the total probability of every frame
// labelling whose collapsed output starts with h. final_score(h) is the log
// probability that the output is exactly h, which equals -ctc_nll(h).
class CtcPrefixScorer {
 public:
  struct State {
    TokenSequence prefix;
    std::vector<double> log_r_nonblank;  // paths ending in the last token
    std::vector<double> log_r_blank;     // paths ending in blank
    double score = 0.0;
  };

  explicit CtcPrefixScorer(Matrix log_probs);

  int frames() const { return static_cast<int>(log_probs_.rows()); }
  State initial() const;
  // Throws std::invalid_argument if `state` was not produced for `prefix`.
  State extend(const State& state, const TokenSequence& prefix, int token) const;
  double final_score(const State& state) const;

 private:
  Matrix log_probs_;
};

double log_add(double a, double b);

}  // namespace ftgan

#endif  // FTGAN_CTC_H_
