// src/decode.cc
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

#include "ftgan/decode.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

#include "ftgan/ctc.h"
#include "ftgan/errors.h"

namespace ftgan {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

void validate(const DecodeConfig& c) {
  if (c.beam < 1) throw ConfigError("decode: beam must be at least 1");
  if (!(c.w_ctc >= 0.0 && c.w_ctc <= 1.0)) throw ConfigError("decode: w_ctc must lie in [0, 1]");
  if (!(c.w_lm >= 0.0)) throw ConfigError("decode: w_lm must be non-negative");
  if (!std::isfinite(c.p_ins)) throw ConfigError("decode: p_ins must be finite");
  if (c.max_len < 0) throw ConfigError("decode: max_len must be non-negative");
}

Json to_json(const DecodeConfig& c) {
  return Json{{"beam", c.beam}, {"w_ctc", c.w_ctc}, {"w_lm", c.w_lm}, {"p_ins", c.p_ins},
              {"max_len", c.max_len}};
}

DecodeConfig decode_config_from_json(const Json& j) {
  const std::string where = "decode";
  check_keys(j, {"beam", "w_ctc", "w_lm", "p_ins", "max_len"}, where);
  DecodeConfig c;
  read_opt(j, "beam", c.beam, where);
  read_opt(j, "w_ctc", c.w_ctc, where);
  read_opt(j, "w_lm", c.w_lm, where);
  read_opt(j, "p_ins", c.p_ins, where);
  read_opt(j, "max_len", c.max_len, where);
  validate(c);
  return c;
}

double Hypothesis::recombine(const DecodeConfig& cfg) const {
  // Unused components are skipped so a -inf score with zero weight stays out.
  double t = (1.0 - cfg.w_ctc) * s2s + ins;
  if (cfg.w_ctc > 0.0) t += cfg.w_ctc * ctc;
  if (cfg.w_lm > 0.0) t += cfg.w_lm * lm;
  return t;
}

BigramLm::BigramLm(int vocab_size, Matrix log_probs) : table_(std::move(log_probs)) {
  if (table_.rows() != vocab_size || table_.cols() != vocab_size)
    throw std::invalid_argument("BigramLm: table must be V x V");
}

double BigramLm::log_prob(int prev, int next) const {
  if (prev < 0 || prev >= vocab_size() || next < 0 || next >= vocab_size())
    throw std::invalid_argument("BigramLm: id out of range");
  return table_(prev, next);
}

BigramLm train_bigram_lm(const std::vector<TokenSequence>& transcripts, const Vocab& vocab) {
  if (transcripts.empty()) throw std::invalid_argument("train_bigram_lm: empty corpus");
  const int V = vocab.size();
  Matrix counts = Matrix::Zero(V, V);
  for (const auto& t : transcripts) {
    int prev = Vocab::kSos;
    for (int tok : t) {
      if (!vocab.is_content(tok)) throw std::invalid_argument("train_bigram_lm: non-content id");
      counts(prev, tok) += 1.0;
      prev = tok;
    }
    counts(prev, Vocab::kEos) += 1.0;
  }
  std::vector<int> outcomes{Vocab::kEos};
  for (int id = Vocab::kFirstContent; id < V; ++id) outcomes.push_back(id);
  const double K = static_cast<double>(outcomes.size());

  Matrix table = Matrix::Constant(V, V, kNegInf);
  for (int u = 0; u < V; ++u) {
    const double total = counts.row(u).sum();
    for (int w : outcomes) table(u, w) = std::log((counts(u, w) + 1.0) / (total + K));
  }
  return BigramLm(V, std::move(table));
}

BeamResult beam_search(const AsrModel& model, const Matrix& features, const BigramLm* lm,
                       const DecodeConfig& cfg) {
  ag::NoGradGuard no_grad;
  return beam_search(model, model.encode_features(features, ForwardContext::eval()), lm, cfg);
}

BeamResult beam_search(const AsrModel& model, const EncoderOutput& enc, const BigramLm* lm,
                       const DecodeConfig& cfg) {
  validate(cfg);
  if (cfg.w_lm > 0.0 && !lm) throw std::invalid_argument("beam_search: w_lm > 0 needs an LM");
  const int V = model.config().vocab_size;
  if (lm && lm->vocab_size() != V) throw std::invalid_argument("beam_search: LM vocab mismatch");
  const int max_len = cfg.max_len > 0 ? cfg.max_len : enc.n_sub;
  ag::NoGradGuard no_grad;

  const bool use_ctc = cfg.w_ctc > 0.0;
  std::optional<CtcPrefixScorer> scorer;
  if (use_ctc) scorer.emplace(model.ctc_log_posteriors(enc).value());

  struct Live {
    Hypothesis hyp;
    CtcPrefixScorer::State state;
  };
  struct Candidate {
    Hypothesis hyp;
    CtcPrefixScorer::State state;
  };

  std::vector<Live> live(1);
  if (use_ctc) live[0].state = scorer->initial();
  std::vector<Hypothesis> ended;
  std::vector<Live> last_live = live;

  for (int step = 1; step <= max_len + 1 && !live.empty(); ++step) {
    std::vector<Candidate> cands;
    for (const Live& p : live) {
      const Matrix logp =
          model.decoder_log_posteriors(p.hyp.tokens, enc, ForwardContext::eval()).value();
      const Eigen::Index row = static_cast<Eigen::Index>(p.hyp.tokens.size());
      const int prev = p.hyp.tokens.empty() ? Vocab::kSos : p.hyp.tokens.back();
      // Token-id order, so equal totals keep the lower id first.
      for (int token = Vocab::kEos; token < V; ++token) {
        const bool eos = token == Vocab::kEos;
        if (!eos && token < Vocab::kFirstContent) continue;
        if (!eos && step == max_len + 1) continue;
        Candidate c{p.hyp, {}};
        c.hyp.s2s += logp(row, token);
        if (lm) c.hyp.lm += lm->log_prob(prev, token);
        if (eos) {
          c.hyp.ended = true;
          if (use_ctc) c.hyp.ctc = scorer->final_score(p.state);
        } else {
          if (use_ctc) {
            c.state = scorer->extend(p.state, p.hyp.tokens, token);
            c.hyp.ctc = c.state.score;
          }
          c.hyp.tokens.push_back(token);
          c.hyp.ins += cfg.p_ins;
        }
        c.hyp.total = c.hyp.recombine(cfg);
        cands.push_back(std::move(c));
      }
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      return a.hyp.total > b.hyp.total;
    });
    if (cands.size() > static_cast<size_t>(cfg.beam)) cands.resize(static_cast<size_t>(cfg.beam));
    std::vector<Live> next;
    for (auto& c : cands) {
      if (c.hyp.ended)
        ended.push_back(std::move(c.hyp));
      else
        next.push_back(Live{std::move(c.hyp), std::move(c.state)});
    }
    if (!next.empty()) last_live = next;
    live = std::move(next);
  }

  BeamResult out;
  out.nbest = ended;
  std::stable_sort(out.nbest.begin(), out.nbest.end(),
                   [](const Hypothesis& a, const Hypothesis& b) { return a.total > b.total; });
  if (out.nbest.size() > static_cast<size_t>(cfg.beam))
    out.nbest.resize(static_cast<size_t>(cfg.beam));
  if (!out.nbest.empty() && std::isfinite(out.nbest.front().total)) {
    out.best = out.nbest.front();
  } else {
    const auto it = std::max_element(
        last_live.begin(), last_live.end(),
        [](const Live& a, const Live& b) { return a.hyp.total < b.hyp.total; });
    out.best = it->hyp;
    out.best.partial = true;
  }
  return out;
}

int edit_distance(const TokenSequence& ref, const TokenSequence& hyp) {
  std::vector<int> prev(hyp.size() + 1), cur(hyp.size() + 1);
  for (size_t j = 0; j <= hyp.size(); ++j) prev[j] = static_cast<int>(j);
  for (size_t i = 1; i <= ref.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= hyp.size(); ++j) {
      const int sub = prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[hyp.size()];
}

double wer(const TokenSequence& ref, const TokenSequence& hyp) {
  if (ref.empty()) throw std::invalid_argument("wer: empty reference");
  return static_cast<double>(edit_distance(ref, hyp)) / static_cast<double>(ref.size());
}

void summarize(EvalReport& report) {
  report.total_edits = 0;
  report.total_ref_tokens = 0;
  for (const auto& row : report.rows) {
    report.total_edits += row.edits;
    report.total_ref_tokens += static_cast<long>(row.ref.size());
  }
  report.corpus_wer = report.total_ref_tokens == 0
                          ? 0.0
                          : static_cast<double>(report.total_edits) /
                                static_cast<double>(report.total_ref_tokens);
}

EvalReport evaluate(const AsrModel& model, const std::vector<Utterance>& data, const BigramLm* lm,
                    const DecodeConfig& cfg) {
  if (data.empty()) throw std::invalid_argument("evaluate: empty dataset");
  EvalReport report;
  report.config = cfg;
  std::vector<const Utterance*> order;
  for (const auto& u : data) order.push_back(&u);
  std::stable_sort(order.begin(), order.end(),
                   [](const Utterance* a, const Utterance* b) { return a->id < b->id; });
  for (const Utterance* u : order) {
    UtteranceResult row;
    row.id = u->id;
    row.ref = u->transcript;
    try {
      const BeamResult r = beam_search(model, u->features, lm, cfg);
      row.scores = r.best;
      row.hyp = r.best.tokens;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    row.edits = edit_distance(row.ref, row.hyp);
    report.rows.push_back(std::move(row));
  }
  summarize(report);
  return report;
}

Json to_json(const EvalReport& r, const Vocab& vocab) {
  Json rows = Json::array();
  for (const auto& u : r.rows) {
    Json row{{"id", u.id},
             {"ref", detokenize(u.ref, vocab)},
             {"hyp", detokenize(u.hyp, vocab)},
             {"edits", u.edits},
             {"scores",
              {{"total", u.scores.total},
               {"s2s", u.scores.s2s},
               {"ctc", u.scores.ctc},
               {"lm", u.scores.lm},
               {"ins", u.scores.ins}}},
             {"partial", u.scores.partial}};
    if (!u.error.empty()) row["error"] = u.error;
    rows.push_back(std::move(row));
  }
  return Json{{"header",
               {{"checkpoint", r.checkpoint_id},
                {"corpus_hash", r.corpus_hash},
                {"split", r.split},
                {"decode", to_json(r.config)}}},
              {"corpus_wer", r.corpus_wer},
              {"total_edits", r.total_edits},
              {"total_ref_tokens", r.total_ref_tokens},
              {"rows", std::move(rows)}};
}

}  // namespace ftgan
