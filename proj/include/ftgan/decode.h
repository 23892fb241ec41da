// ftgan/decode.h
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
// Hybrid CTC/attention beam search with bigram shallow fusion, WER scoring
// and evaluation reports.
//
// Every expansion of a prefix g by token c adds
//   (1 - w_ctc) * log P_s2s(c | g, X) + w_ctc * (ctc(g + c) - ctc(g))
//     + w_lm * log P_lm(c | last(g)) + p_ins   (p_ins for content tokens only)
// where ctc() is the CTC prefix score, and for c = <eos> the final CTC
// likelihood of g.

#ifndef FTGAN_DECODE_H_
#define FTGAN_DECODE_H_

#include <string>
#include <vector>

#include "ftgan/asr_model.h"
#include "ftgan/corpus.h"
#include "ftgan/json_util.h"

namespace ftgan {

struct DecodeConfig {
  int beam = 10;
  double w_ctc = 0.5;
  double w_lm = 0.3;
  double p_ins = 0.0;
  // 0 = as many tokens as encoder frames.
  int max_len = 0;
};

void validate(const DecodeConfig& cfg);
Json to_json(const DecodeConfig& cfg);
DecodeConfig decode_config_from_json(const Json& j);

struct Hypothesis {
  TokenSequence tokens;  // content tokens, without <eos>
  double total = 0.0;
  double s2s = 0.0;
  double ctc = 0.0;
  double lm = 0.0;
  double ins = 0.0;  // p_ins * |tokens|
  bool ended = false;
  // Set when no hypothesis reached <eos> with a finite score; `tokens` is
  // then the best unfinished prefix.
  bool partial = false;

  // (1 - w_ctc) * s2s + w_ctc * ctc + w_lm * lm + ins
  double recombine(const DecodeConfig& cfg) const;
};

// Add-one smoothed bigram model. Contexts are <sos> and the content tokens;
// outcomes are the content tokens and <eos>.
class BigramLm {
 public:
  BigramLm() = default;
  BigramLm(int vocab_size, Matrix log_probs);

  int vocab_size() const { return static_cast<int>(table_.rows()); }
  // log P(next | prev); -inf for ids that are never an outcome.
  double log_prob(int prev, int next) const;
  const Matrix& table() const { return table_; }

 private:
  Matrix table_;  // V x V, rows = context
};

// Throws std::invalid_argument on an empty transcript list.
BigramLm train_bigram_lm(const std::vector<TokenSequence>& transcripts, const Vocab& vocab);

struct BeamResult {
  Hypothesis best;
  std::vector<Hypothesis> nbest;  // ended hypotheses, best first
};

// Eval-mode decode of one utterance. `lm` may be null when w_lm is 0.
BeamResult beam_search(const AsrModel& model, const Matrix& features, const BigramLm* lm,
                       const DecodeConfig& cfg);
BeamResult beam_search(const AsrModel& model, const EncoderOutput& enc, const BigramLm* lm,
                       const DecodeConfig& cfg);

// Levenshtein distance (substitutions + deletions + insertions).
int edit_distance(const TokenSequence& ref, const TokenSequence& hyp);
// Throws std::invalid_argument on an empty reference.
double wer(const TokenSequence& ref, const TokenSequence& hyp);

struct UtteranceResult {
  std::string id;
  TokenSequence ref;
  TokenSequence hyp;
  int edits = 0;
  Hypothesis scores;
  // Non-empty when decoding failed; the hypothesis is then empty.
  std::string error;
};

struct EvalReport {
  std::string checkpoint_id;
  std::string corpus_hash;
  std::string split;
  DecodeConfig config;
  std::vector<UtteranceResult> rows;  // sorted by utterance id
  long total_edits = 0;
  long total_ref_tokens = 0;
  double corpus_wer = 0.0;  // pooled: total edits / total reference tokens
};

// Throws std::invalid_argument on an empty dataset. Per-utterance decode
// failures are recorded in the row and counted as full deletions.
// Recomputes the totals and pooled WER from the rows.
void summarize(EvalReport& report);

EvalReport evaluate(const AsrModel& model, const std::vector<Utterance>& data, const BigramLm* lm,
                    const DecodeConfig& cfg);

Json to_json(const EvalReport& report, const Vocab& vocab);

}  // namespace ftgan

#endif  // FTGAN_DECODE_H_
