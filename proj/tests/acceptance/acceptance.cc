// tests/acceptance/acceptance.cc
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
// Runs every acceptance criterion and prints one PASS/FAIL line for each.
// Exit status is non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ftgan/asr_model.h"
#include "ftgan/checkpoint.h"
#include "ftgan/ctc.h"
#include "ftgan/decode.h"
#include "ftgan/errors.h"
#include "ftgan/gan.h"
#include "ftgan/trainer.h"
#include "oracles.h"
#include "test_util.h"

namespace ftgan {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail << "first failure: " << what << "; ";
      pass = false;
    }
  }
};

int failures = 0;
std::vector<int> selected;  // empty runs everything

void report(int id, const std::string& name, const std::function<void(Outcome&)>& body) {
  if (!selected.empty() && std::find(selected.begin(), selected.end(), id) == selected.end())
    return;
  Outcome o;
  const auto t0 = Clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail << "exception: " << e.what() << "; ";
  }
  std::printf("%s %d %s: %s(%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(),
              o.detail.str().c_str(), seconds_since(t0));
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

// ---- 1 -------------------------------------------------------------------

void ctc_oracle(Outcome& o) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> frames(1, 6), vocab(2, 4), length(0, 3);
  int compared = 0, infeasible = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int T = frames(rng), V = vocab(rng);
    const Matrix lp = testing::log_softmax(testing::random_matrix(T, V, rng, 3.0));
    TokenSequence target(static_cast<size_t>(length(rng)));
    for (int& y : target) y = std::uniform_int_distribution<int>(1, V - 1)(rng);
    if (ctc_min_frames(target) > T) {
      bool threw = false;
      try {
        ctc_nll(lp, target);
      } catch (const InfeasibleError&) {
        threw = true;
      }
      o.require(threw, "infeasible instance did not throw");
      ++infeasible;
      continue;
    }
    const double diff = std::abs(ctc_nll(lp, target) + oracle::ctc_log_likelihood(lp, target));
    worst = std::max(worst, diff);
    ++compared;
  }
  const double elapsed = seconds_since(t0);
  o.require(worst <= 1e-6, "difference above 1e-6");
  o.require(elapsed < 10.0, "slower than 10 s");
  o.detail << compared << " enumerated, " << infeasible << " infeasible, max |diff| " << worst
           << " ";
}

// ---- 2 -------------------------------------------------------------------

template <typename LossFn>
double sampled_gradcheck(ParamSet& params, const LossFn& loss, std::mt19937_64& rng, int samples,
                         double h, double floor) {
  const std::vector<ag::Var> grads = ag::grad(loss(), params.vars());
  std::uniform_int_distribution<size_t> pick(0, params.size() - 1);
  double worst = 0.0;
  for (int k = 0; k < samples; ++k) {
    const size_t pi = pick(rng);
    ag::Var& leaf = params.vars()[pi];
    const auto i = std::uniform_int_distribution<Eigen::Index>(0, leaf.value().size() - 1)(rng);
    const double fd = testing::central_difference(leaf, i, [&] { return loss().scalar(); }, h);
    worst = std::max(worst, testing::relative_error(grads[pi].value().data()[i], fd, floor));
  }
  return worst;
}

void gradient_checks(Outcome& o) {
  const auto t0 = Clock::now();
  double worst_asr = 0.0, worst_gp = 0.0;
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    CorpusConfig cc = testing::tiny_corpus_config(seed);
    cc.num_content_tokens = 2;
    const Corpus corpus = generate_corpus(cc);
    AsrModel model(testing::tiny_asr_config(corpus.vocab.size(), cc.feature_dim), seed);
    const Batch batch = make_batch(
        std::vector<Utterance>(corpus.train.begin(), corpus.train.begin() + 3), corpus.vocab);
    std::mt19937_64 rng(seed);
    worst_asr = std::max(
        worst_asr,
        sampled_gradcheck(
            model.params(),
            [&] { return asr_loss(model, batch, 0.3, ForwardContext::eval()).total; }, rng, 20,
            1e-4, 1e-5));

    DiscriminatorConfig dc;
    dc.vocab_size = 6;
    dc.projection_dim = 5;
    dc.conv_channels = 4;
    dc.norm1 = dc.norm2 = "layer";
    Discriminator d(dc, seed);
    auto dist = [&](Eigen::Index rows) -> Matrix {
      return testing::log_softmax(testing::random_matrix(rows, 6, rng, 2.0)).array().exp().matrix();
    };
    const std::vector<Matrix> xs = {dist(4), dist(5)};
    worst_gp = std::max(
        worst_gp, sampled_gradcheck(
                      d.params(), [&] { return gradient_penalty(d.critic(), xs); }, rng, 20, 1e-5,
                      1e-6));
  }
  const double elapsed = seconds_since(t0);
  o.require(worst_asr <= 1e-3, "asr loss gradient");
  o.require(worst_gp <= 1e-3, "gradient penalty gradient");
  o.require(elapsed < 60.0, "slower than 60 s");
  o.detail << "10 seeds x 20 params each; max rel err asr " << worst_asr << ", gp " << worst_gp
           << " ";
}

// ---- 3 -------------------------------------------------------------------

Matrix onehot(const std::vector<int>& ids, Eigen::Index cols) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(ids.size()), cols);
  for (size_t i = 0; i < ids.size(); ++i) m(static_cast<Eigen::Index>(i), ids[i]) = 1.0;
  return m;
}

void identities(Outcome& o) {
  std::mt19937_64 rng(3);
  auto dist = [&](Eigen::Index rows) -> Matrix {
    return testing::log_softmax(testing::random_matrix(rows, 6, rng, 2.0)).array().exp().matrix();
  };
  const Matrix y = onehot({4, 5, 4}, 6), yh = dist(3);
  o.require(interpolate(ag::constant(y), ag::constant(yh), 1.0).value() == y, "gamma = 1");
  o.require(interpolate(ag::constant(y), ag::constant(yh), 0.0).value() == yh, "gamma = 0");

  const Critic constant = [](const std::vector<ag::Var>& xs) {
    std::vector<ag::Var> out;
    for (const auto& x : xs) out.push_back(ag::add_const(ag::scale(ag::sum(x), 0.0), 0.7));
    return out;
  };
  const std::vector<Matrix> fake = {yh, dist(4)};
  const std::vector<Matrix> real = {y, onehot({5, 4, 5, 4}, 6)};
  const double gp_const = gradient_penalty(constant, fake).scalar();
  const GanWeights w{1e-4, 10.0};
  const double ld = discriminator_loss(constant, real, fake, w, rng).total.scalar();

  Matrix u = testing::random_matrix(4, 6, rng);
  const Critic unit = [u](const std::vector<ag::Var>& xs) {
    std::vector<ag::Var> out;
    for (const auto& x : xs) {
      Matrix v = u.topRows(x.rows());
      v /= v.norm();
      out.push_back(ag::sum(ag::mul(x, ag::constant(v))));
    }
    return out;
  };
  const double gp_unit = gradient_penalty(unit, fake).scalar();

  o.require(std::abs(gp_const - 1.0) <= 1e-9, "constant critic gp");
  o.require(std::abs(ld - w.lambda_gp) <= 1e-9, "constant critic L_D");
  o.require(std::abs(gp_unit) <= 1e-9, "unit linear critic gp");
  o.detail << "gp(const) " << gp_const << ", L_D(const) " << ld << ", gp(unit) " << gp_unit << " ";
}

// ---- 4 -------------------------------------------------------------------

void isolation(Outcome& o) {
  const Corpus corpus = generate_corpus(testing::tiny_corpus_config(2));
  AsrConfig asr = testing::tiny_asr_config(corpus.vocab.size(), corpus.config.feature_dim);
  asr.dropout = 0.1;
  TrainConfig train;
  train.epochs = 2;
  train.finetune_epochs = 5;
  train.batch_size = 4;
  train.warmup = 4;
  train.discriminator.projection_dim = 6;
  train.discriminator.conv_channels = 5;

  testing::TempDir pre("accept-iso");
  RunOptions po;
  po.dir = pre.str();
  po.record_wall_time = false;
  const RunLedger p = pretrain(corpus, asr, train, po);

  RunOptions go;
  go.max_iterations = 10;
  std::vector<IterationTrace> traces;
  go.on_iteration = [&](const IterationTrace& t) { traces.push_back(t); };
  finetune_gan(p.checkpoint_path(p.records().back()), corpus, train, go);

  o.require(traces.size() == 10, "expected 10 iterations");
  int ok = 0;
  for (const IterationTrace& t : traces) {
    const bool good = t.theta_before_critic == t.theta_after_critic &&
                      t.critic_before_critic != t.critic_after_critic &&
                      t.critic_before_generator == t.critic_after_generator &&
                      t.theta_before_generator != t.theta_after_generator;
    if (good) ++ok;
  }
  o.require(ok == static_cast<int>(traces.size()), "an iteration leaked an update");
  o.detail << ok << "/" << traces.size() << " iterations isolated ";
}

// ---- 5 -------------------------------------------------------------------

BigramLm random_lm(std::mt19937_64& rng) {
  std::vector<TokenSequence> texts;
  std::uniform_int_distribution<int> tok(Vocab::kFirstContent, Vocab::kFirstContent + 3), len(1, 4);
  for (int i = 0; i < 12; ++i) {
    TokenSequence t(static_cast<size_t>(len(rng)));
    for (int& x : t) x = tok(rng);
    texts.push_back(t);
  }
  return train_bigram_lm(texts, Vocab::letters(4));
}

void beam_oracle(Outcome& o) {
  const auto t0 = Clock::now();
  const DecodeConfig configs[] = {{125, 0.0, 0.0, 0.0, 3},
                                  {125, 0.5, 0.3, 0.0, 3},
                                  {125, 0.3, 0.0, 1.0, 3},
                                  {125, 1.0, 0.7, 0.5, 3},
                                  {125, 0.7, 0.5, -0.5, 3}};
  int matched = 0;
  double worst = 0.0;
  for (uint64_t m = 0; m < 50; ++m) {
    std::mt19937_64 rng(1000 + m);
    AsrModel model(testing::tiny_asr_config(Vocab::kFirstContent + 4, 8), 1000 + m);
    for (const char* name : {"decoder.out.w", "ctc.w"}) model.params().at(name).mutable_value() *= 4.0;
    const int frames = std::uniform_int_distribution<int>(12, 28)(rng);
    EncoderOutput enc;
    {
      ag::NoGradGuard no_grad;
      enc = model.encode_features(testing::random_matrix(frames, 8, rng), ForwardContext::eval());
    }
    const BigramLm lm = random_lm(rng);
    const DecodeConfig& cfg = configs[m % 5];
    const BeamResult r = beam_search(model, enc, &lm, cfg);
    const oracle::Scored best = oracle::exhaustive_decode(model, enc, &lm, cfg, 3);
    const double diff = std::abs(r.best.total - best.total);
    worst = std::max(worst, diff);
    if (r.best.tokens == best.tokens && diff <= 1e-9) ++matched;
  }
  const double elapsed = seconds_since(t0);
  o.require(matched == 50, "beam result differs from enumeration");
  o.require(elapsed < 30.0, "slower than 30 s");
  o.detail << matched << "/50 models match, max score diff " << worst << " ";
}

// ---- 6, 7, 8 -------------------------------------------------------------

struct SeedRun {
  uint64_t seed = 0;
  Corpus corpus;
  RunLedger pretrain, baseline, gan, scratch;
  std::string averaged;  // k = 5 average of the pretraining checkpoints
  double averaged_accuracy = 0.0;
};

double final_accuracy(const RunLedger& l) { return l.records().back().val_accuracy; }

std::vector<SeedRun> toy_runs;

void toy_end_to_end(Outcome& o, const std::string& root) {
  const auto t0 = Clock::now();
  constexpr int kPretrainEpochs = 30;
  for (uint64_t seed = 1; seed <= 3; ++seed) {
    SeedRun run;
    run.seed = seed;
    CorpusConfig cc;
    cc.seed = seed;
    run.corpus = generate_corpus(cc);
    AsrConfig asr;
    asr.vocab_size = run.corpus.vocab.size();
    asr.feature_dim = cc.feature_dim;
    TrainConfig t;
    t.seed = seed;
    t.epochs = kPretrainEpochs;
    const std::string dir = root + "/seed" + std::to_string(seed);
    RunOptions opts;
    opts.dir = dir + "/pretrain";
    run.pretrain = pretrain(run.corpus, asr, t, opts);
    // Fine-tuning starts from the averaged pretrained model, as `ftgan average`
    // followed by `ftgan finetune-*` would.
    run.averaged = dir + "/pretrain/average.ckpt";
    const Checkpoint avg = average_checkpoints(run.pretrain, 5);
    write_checkpoint(run.averaged, avg);
    run.averaged_accuracy = dev_accuracy(AsrModel(avg.asr_config, avg.asr_params), run.corpus);
    const std::string& init = run.averaged;

    // Same extra budget (half the pretraining epochs) for both continuations.
    TrainConfig tb = t;
    tb.phase = Phase::kFinetuneBaseline;
    opts.dir = dir + "/baseline";
    run.baseline = finetune_baseline(init, run.corpus, tb, opts);
    TrainConfig tg = t;
    tg.phase = Phase::kFinetuneGan;
    opts.dir = dir + "/gan";
    run.gan = finetune_gan(init, run.corpus, tg, opts);
    TrainConfig ts = t;
    ts.phase = Phase::kFinetuneGanScratch;
    ts.finetune_epochs = kPretrainEpochs + tb.resolved_finetune_epochs();
    opts.dir = dir + "/scratch";
    run.scratch = finetune_gan_from_scratch(run.corpus, asr, ts, opts);

    double best_epoch = 0.0;
    for (const EpochRecord& r : run.pretrain.records()) best_epoch = std::max(best_epoch, r.val_accuracy);
    std::printf(
        "  seed %llu: pretrain final %.4f best %.4f averaged %.4f | baseline %.4f  gan %.4f  "
        "scratch %.4f\n",
        static_cast<unsigned long long>(seed), final_accuracy(run.pretrain), best_epoch,
        run.averaged_accuracy, final_accuracy(run.baseline), final_accuracy(run.gan),
        final_accuracy(run.scratch));
    std::fflush(stdout);
    toy_runs.push_back(std::move(run));
  }

  double mean_base = 0.0, mean_gan = 0.0;
  int pretrain_ok = 0, scratch_worse = 0;
  for (const SeedRun& r : toy_runs) {
    if (r.averaged_accuracy > 0.9) ++pretrain_ok;
    if (final_accuracy(r.scratch) < final_accuracy(r.baseline)) ++scratch_worse;
    mean_base += final_accuracy(r.baseline) / 3.0;
    mean_gan += final_accuracy(r.gan) / 3.0;
  }
  const double elapsed = seconds_since(t0);
  o.require(pretrain_ok == 3, "(a) averaged pretrained model below 0.9");
  o.require(mean_gan >= mean_base, "(b) adversarial mean below baseline mean");
  o.require(scratch_worse >= 2, "(c) scratch not worse on 2 of 3 seeds");
  o.require(elapsed <= 1800.0, "slower than 30 min");
  o.detail << "(a) " << pretrain_ok << "/3 averaged models above 0.9; (b) mean gan " << mean_gan
           << " vs baseline " << mean_base << "; (c) scratch worse on " << scratch_worse
           << "/3 ";
}

void averaging(Outcome& o) {
  // Dyadic values make every partial sum exact, so the mean has one
  // correctly rounded answer regardless of summation order.
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> q(-4096, 4096);
  const AsrConfig cfg = testing::tiny_asr_config(8, 8);
  std::vector<Checkpoint> cks;
  for (int i = 0; i < 5; ++i) {
    Checkpoint c;
    c.asr_config = cfg;
    c.asr_params = AsrModel(cfg, 1).params();
    for (auto& v : c.asr_params.vars())
      for (Eigen::Index j = 0; j < v.value().size(); ++j)
        v.mutable_value().data()[j] = q(rng) / 64.0;
    cks.push_back(std::move(c));
  }
  const Checkpoint avg = average_checkpoints(cks);
  long mismatches = 0;
  for (size_t p = 0; p < avg.asr_params.size(); ++p) {
    const Matrix& got = avg.asr_params.vars()[p].value();
    for (Eigen::Index j = 0; j < got.size(); ++j) {
      double sum = 0.0;
      for (int i = 4; i >= 0; --i) sum += cks[static_cast<size_t>(i)].asr_params.vars()[p].value().data()[j];
      if (got.data()[j] != sum / 5.0) ++mismatches;
    }
  }
  o.require(mismatches == 0, "average differs from elementwise mean");

  o.require(!toy_runs.empty(), "no toy runs to average");
  const SeedRun& run = toy_runs.front();
  const Checkpoint best5 = read_checkpoint(run.averaged);
  const AsrModel model(best5.asr_config, best5.asr_params);
  DecodeConfig no_lm;
  no_lm.w_lm = 0.0;
  const EvalReport r = evaluate(model, run.corpus.test, nullptr, no_lm);
  int failed_rows = 0;
  for (const UtteranceResult& row : r.rows)
    if (!row.error.empty()) ++failed_rows;
  o.require(std::isfinite(r.corpus_wer), "averaged model WER not finite");
  o.require(failed_rows == 0, "some utterances could not be decoded");
  o.detail << mismatches << " mismatches over " << avg.asr_params.num_scalars()
           << " scalars; averaged pretrain (seed 1, k=5) test WER " << r.corpus_wer << ", "
           << failed_rows << " decode errors ";
}

void lm_fusion(Outcome& o) {
  o.require(!toy_runs.empty(), "no toy runs to decode");
  for (const SeedRun& run : toy_runs) {
    std::vector<TokenSequence> text;
    for (const auto& u : run.corpus.train) text.push_back(u.transcript);
    const BigramLm lm = train_bigram_lm(text, run.corpus.vocab);
    const Checkpoint ck = read_checkpoint(run.gan.checkpoint_path(run.gan.records().back()));
    const AsrModel model(ck.asr_config, ck.asr_params);
    DecodeConfig plain;
    plain.w_lm = 0.0;
    const DecodeConfig fused;
    const EvalReport a = evaluate(model, run.corpus.test, nullptr, plain);
    const EvalReport b = evaluate(model, run.corpus.test, &lm, fused);
    // Net length change shows whether fusion trades in deletions.
    long length_shift = 0;
    for (size_t i = 0; i < b.rows.size(); ++i)
      length_shift += static_cast<long>(b.rows[i].hyp.size()) - static_cast<long>(a.rows[i].hyp.size());
    o.require(b.corpus_wer <= a.corpus_wer * 1.05, "fusion worsened WER by more than 5% relative");
    o.detail << "seed " << run.seed << " " << a.total_edits << "/" << a.total_ref_tokens << " -> "
             << b.total_edits << "/" << b.total_ref_tokens << " edits (length shift "
             << length_shift << "); ";
  }
}

}  // namespace
}  // namespace ftgan

// Optional arguments pick criteria by number; 7 and 8 reuse the runs of 6.
int main(int argc, char** argv) {
  using namespace ftgan;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  testing::TempDir root("acceptance");
  report(1, "ctc matches path enumeration", ctc_oracle);
  report(2, "gradients match finite differences", gradient_checks);
  report(3, "interpolation, penalty and critic-loss identities", identities);
  report(4, "critic and generator updates are isolated", isolation);
  report(5, "beam search matches exhaustive decoding", beam_oracle);
  report(6, "toy end-to-end comparison",
         [&](Outcome& o) { toy_end_to_end(o, root.str()); });
  report(7, "checkpoint averaging", averaging);
  report(8, "language model fusion sensitivity", lm_fusion);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
