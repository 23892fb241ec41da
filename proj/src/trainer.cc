// src/trainer.cc
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

#include "ftgan/trainer.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "ftgan/errors.h"
#include "ftgan/io.h"

namespace ftgan {

namespace fs = std::filesystem;

namespace {

// Random stream tags.
enum : uint64_t {
  kShuffle = 1,
  kAugment = 2,
  kDropout = 3,
  kFakeDropout = 4,
  kGamma = 5,
  kCriticInit = 6,
};

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("train: " + what);
}

void validate_adam(const AdamConfig& a, const std::string& where) {
  if (!(a.lr > 0.0) || !(a.beta1 >= 0.0 && a.beta1 < 1.0) || !(a.beta2 >= 0.0 && a.beta2 < 1.0) ||
      !(a.eps > 0.0))
    throw ConfigError(where + ": need lr > 0, betas in [0, 1), eps > 0");
}

// Shuffled index groups: outer = optimizer step, inner = micro-batch.
struct Schedule {
  std::vector<std::vector<size_t>> micro_batches;
  std::vector<std::pair<size_t, size_t>> groups;  // [begin, end) into micro_batches
};

Schedule epoch_schedule(size_t n, const TrainConfig& cfg, int epoch) {
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto rng = make_rng({cfg.seed, static_cast<uint64_t>(epoch), kShuffle});
  std::shuffle(order.begin(), order.end(), rng);
  Schedule s;
  const size_t m = static_cast<size_t>(cfg.batch_size);
  for (size_t b = 0; b < n; b += m)
    s.micro_batches.emplace_back(order.begin() + b, order.begin() + std::min(n, b + m));
  const size_t acc = static_cast<size_t>(cfg.accumulation);
  for (size_t g = 0; g < s.micro_batches.size(); g += acc)
    s.groups.emplace_back(g, std::min(s.micro_batches.size(), g + acc));
  return s;
}

Batch training_batch(const Corpus& corpus, const std::vector<size_t>& idx, const TrainConfig& cfg,
                     int epoch) {
  std::vector<Utterance> items;
  items.reserve(idx.size());
  for (size_t i : idx) {
    Utterance u = corpus.train[i];
    if (cfg.spec_augment) {
      auto rng = make_rng({cfg.seed, static_cast<uint64_t>(epoch), i, kAugment});
      u.features = spec_augment(u.features, cfg.spec_augment_policy, rng());
    }
    items.push_back(std::move(u));
  }
  return make_batch(items, corpus.vocab);
}

std::mt19937_64 stream(const TrainConfig& cfg, int epoch, size_t micro_batch, uint64_t tag,
                       uint64_t extra = 0) {
  return make_rng({cfg.seed, static_cast<uint64_t>(epoch), micro_batch, tag, extra});
}

void scale_grads(GradSet& grads, double s) {
  for (auto& g : grads) g *= s;
}

void check_finite(double v, const std::string& what, int epoch, int iteration) {
  if (!std::isfinite(v)) {
    std::ostringstream os;
    os << "non-finite " << what << " (" << v << ") at epoch " << epoch << ", iteration "
       << iteration;
    throw DivergenceError(os.str());
  }
}

void check_finite(const GradSet& grads, const ParamSet& params, int epoch, int iteration) {
  for (size_t i = 0; i < grads.size(); ++i)
    if (!grads[i].allFinite())
      check_finite(std::nan(""), "gradient for " + params.names()[i], epoch, iteration);
}

std::vector<Matrix> real_sequences(const Batch& batch) {
  std::vector<Matrix> out;
  for (size_t i = 0; i < batch.size(); ++i)
    out.push_back(batch.real_onehot[i].topRows(batch.target_lengths[i]));
  return out;
}

std::string checkpoint_name(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "checkpoints/epoch-%03d.ckpt", epoch);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Writes the epoch checkpoint, appends the record and prunes old files.
void finish_epoch(RunLedger& ledger, EpochRecord rec, const Checkpoint& ckpt,
                  const TrainConfig& cfg, const RunOptions& opts) {
  if (!ledger.dir().empty()) {
    rec.checkpoint = checkpoint_name(rec.epoch);
    fs::create_directories(fs::path(ledger.dir()) / "checkpoints");
    write_checkpoint(ledger.checkpoint_path(rec), ckpt);
  }
  ledger.append(rec);
  if (!ledger.dir().empty()) {
    ledger.flush();
    if (cfg.keep_checkpoints > 0) {
      std::vector<const EpochRecord*> rows;
      for (const auto& r : ledger.records()) rows.push_back(&r);
      std::stable_sort(rows.begin(), rows.end(), [](const EpochRecord* a, const EpochRecord* b) {
        return a->val_accuracy > b->val_accuracy;
      });
      for (size_t i = static_cast<size_t>(cfg.keep_checkpoints); i < rows.size(); ++i)
        if (rows[i]->epoch != rec.epoch && !rows[i]->checkpoint.empty())
          fs::remove(ledger.checkpoint_path(*rows[i]));
    }
  }
  if (opts.on_epoch) opts.on_epoch(rec);
}

void check_compatible(const Checkpoint& ckpt, const Corpus& corpus) {
  const AsrConfig& a = ckpt.asr_config;
  if (a.vocab_size != corpus.vocab.size() || a.feature_dim != corpus.config.feature_dim)
    throw MissingArtifactError("checkpoint is incompatible with the corpus (vocab " +
                               std::to_string(a.vocab_size) + " vs " +
                               std::to_string(corpus.vocab.size()) + ", features " +
                               std::to_string(a.feature_dim) + " vs " +
                               std::to_string(corpus.config.feature_dim) + ")");
  try {
    AsrModel probe(a, ckpt.asr_params);
  } catch (const std::exception& e) {
    throw MissingArtifactError(std::string("checkpoint parameters do not match its config: ") +
                               e.what());
  }
}

struct ResumePoint {
  RunLedger ledger;
  std::optional<Checkpoint> checkpoint;
};

// Loads the ledger and last checkpoint when resuming, otherwise starts an
// empty ledger (truncating any file on disk).
ResumePoint open_run(const RunOptions& opts, Phase phase) {
  ResumePoint rp{RunLedger(opts.dir), std::nullopt};
  if (opts.resume && !opts.dir.empty() && fs::exists(RunLedger(opts.dir).path())) {
    rp.ledger = RunLedger::load(opts.dir);
    if (!rp.ledger.empty()) {
      const EpochRecord& last = rp.ledger.records().back();
      if (last.phase != phase_name(phase))
        throw ConfigError("resume: run directory holds phase '" + last.phase + "', not '" +
                          phase_name(phase) + "'");
      rp.checkpoint = read_checkpoint(rp.ledger.checkpoint_path(last));
    }
  } else if (!opts.dir.empty()) {
    fs::create_directories(opts.dir);
    rp.ledger.flush();
  }
  return rp;
}

}  // namespace

std::string phase_name(Phase p) {
  switch (p) {
    case Phase::kPretrain: return "pretrain";
    case Phase::kFinetuneGan: return "finetune_gan";
    case Phase::kFinetuneBaseline: return "finetune_baseline";
    case Phase::kFinetuneGanScratch: return "finetune_gan_scratch";
  }
  return "unknown";
}

Phase phase_from_name(const std::string& name) {
  for (Phase p : {Phase::kPretrain, Phase::kFinetuneGan, Phase::kFinetuneBaseline,
                  Phase::kFinetuneGanScratch})
    if (phase_name(p) == name) return p;
  throw ConfigError("train.phase: unknown phase '" + name + "'");
}

void validate(const TrainConfig& c) {
  require(c.epochs >= 1, "epochs must be at least 1");
  require(c.finetune_epochs >= 0, "finetune_epochs must be non-negative");
  require(c.batch_size >= 1, "batch_size must be at least 1");
  require(c.accumulation >= 1, "accumulation must be at least 1");
  require(c.alpha >= 0.0 && c.alpha <= 1.0, "alpha must lie in [0, 1]");
  require(c.n_critic >= 1, "n_critic must be at least 1");
  require(c.warmup >= 1, "warmup must be at least 1");
  require(c.lr_scale > 0.0, "lr_scale must be positive");
  require(c.keep_checkpoints >= 0, "keep_checkpoints must be non-negative");
  validate(c.gan);
  validate(c.discriminator);
  validate_adam(c.adam_pretrain, "train.adam_pretrain");
  validate_adam(c.adam_finetune, "train.adam_finetune");
}

Json to_json(const TrainConfig& c) {
  return Json{{"phase", phase_name(c.phase)},
              {"epochs", c.epochs},
              {"finetune_epochs", c.finetune_epochs},
              {"batch_size", c.batch_size},
              {"accumulation", c.accumulation},
              {"alpha", c.alpha},
              {"gan", to_json(c.gan)},
              {"discriminator", to_json(c.discriminator)},
              {"n_critic", c.n_critic},
              {"adam_pretrain", to_json(c.adam_pretrain)},
              {"adam_finetune", to_json(c.adam_finetune)},
              {"warmup", c.warmup},
              {"lr_scale", c.lr_scale},
              {"seed", c.seed},
              {"keep_checkpoints", c.keep_checkpoints},
              {"spec_augment", c.spec_augment},
              {"spec_augment_policy", to_json(c.spec_augment_policy)}};
}

TrainConfig train_config_from_json(const Json& j) {
  const std::string where = "train";
  check_keys(j,
             {"phase", "epochs", "finetune_epochs", "batch_size", "accumulation", "alpha", "gan",
              "discriminator", "n_critic", "adam_pretrain", "adam_finetune", "warmup", "lr_scale",
              "seed", "keep_checkpoints", "spec_augment", "spec_augment_policy"},
             where);
  TrainConfig c;
  std::string phase = phase_name(c.phase);
  read_opt(j, "phase", phase, where);
  c.phase = phase_from_name(phase);
  read_opt(j, "epochs", c.epochs, where);
  read_opt(j, "finetune_epochs", c.finetune_epochs, where);
  read_opt(j, "batch_size", c.batch_size, where);
  read_opt(j, "accumulation", c.accumulation, where);
  read_opt(j, "alpha", c.alpha, where);
  if (j.contains("gan")) c.gan = gan_weights_from_json(j.at("gan"));
  if (j.contains("discriminator"))
    c.discriminator = discriminator_config_from_json(j.at("discriminator"));
  read_opt(j, "n_critic", c.n_critic, where);
  if (j.contains("adam_pretrain"))
    c.adam_pretrain = adam_config_from_json(j.at("adam_pretrain"), where + ".adam_pretrain");
  if (j.contains("adam_finetune"))
    c.adam_finetune = adam_config_from_json(j.at("adam_finetune"), where + ".adam_finetune");
  read_opt(j, "warmup", c.warmup, where);
  read_opt(j, "lr_scale", c.lr_scale, where);
  read_opt(j, "seed", c.seed, where);
  read_opt(j, "keep_checkpoints", c.keep_checkpoints, where);
  read_opt(j, "spec_augment", c.spec_augment, where);
  if (j.contains("spec_augment_policy"))
    c.spec_augment_policy = spec_augment_policy_from_json(j.at("spec_augment_policy"));
  validate(c);
  return c;
}

// Critic fields are written only for adversarial phases.
Json to_json(const EpochRecord& r) {
  Json j{{"epoch", r.epoch},
         {"phase", r.phase},
         {"loss_total", r.loss_total},
         {"loss_s2s", r.loss_s2s},
         {"loss_ctc", r.loss_ctc}};
  if (r.phase == phase_name(Phase::kFinetuneGan) ||
      r.phase == phase_name(Phase::kFinetuneGanScratch)) {
    j["adv_term"] = r.adv_term;
    j["loss_d"] = r.loss_d;
    j["gp"] = r.gp;
    j["d_real"] = r.d_real;
    j["d_fake"] = r.d_fake;
  }
  j["val_accuracy"] = r.val_accuracy;
  j["wall_time"] = r.wall_time;
  j["updates"] = r.updates;
  j["checkpoint"] = r.checkpoint;
  return j;
}

EpochRecord epoch_record_from_json(const Json& j) {
  EpochRecord r;
  r.epoch = j.at("epoch").get<int>();
  r.phase = j.at("phase").get<std::string>();
  r.loss_total = j.at("loss_total").get<double>();
  r.loss_s2s = j.at("loss_s2s").get<double>();
  r.loss_ctc = j.at("loss_ctc").get<double>();
  r.adv_term = j.value("adv_term", 0.0);
  r.loss_d = j.value("loss_d", 0.0);
  r.gp = j.value("gp", 0.0);
  r.d_real = j.value("d_real", 0.0);
  r.d_fake = j.value("d_fake", 0.0);
  r.val_accuracy = j.at("val_accuracy").get<double>();
  r.wall_time = j.at("wall_time").get<double>();
  r.updates = j.at("updates").get<int64_t>();
  r.checkpoint = j.at("checkpoint").get<std::string>();
  return r;
}

std::string RunLedger::path() const { return (fs::path(dir_) / "ledger.jsonl").string(); }

std::string RunLedger::checkpoint_path(const EpochRecord& r) const {
  return (fs::path(dir_) / r.checkpoint).string();
}

void RunLedger::append(const EpochRecord& r) {
  if (!records_.empty() && r.epoch <= records_.back().epoch)
    throw std::logic_error("RunLedger: epochs must be strictly increasing");
  records_.push_back(r);
}

std::string RunLedger::to_jsonl() const {
  std::string out;
  for (const auto& r : records_) out += to_json(r).dump() + "\n";
  return out;
}

void RunLedger::flush() const { write_file_atomic(path(), to_jsonl()); }

RunLedger RunLedger::load(const std::string& dir) {
  RunLedger ledger(dir);
  std::istringstream in(read_file(ledger.path()));
  std::string line;
  try {
    while (std::getline(in, line))
      if (!line.empty()) ledger.append(epoch_record_from_json(Json::parse(line)));
  } catch (const std::exception& e) {
    throw MissingArtifactError("ledger " + ledger.path() + " is corrupt: " + e.what());
  }
  return ledger;
}

double dev_accuracy(const AsrModel& model, const Corpus& corpus) {
  return validation_accuracy(model, make_batch(corpus.dev, corpus.vocab));
}

RunLedger pretrain(const Corpus& corpus, const AsrConfig& asr_cfg, const TrainConfig& cfg,
                   const RunOptions& opts) {
  validate(cfg);
  validate(asr_cfg);
  if (asr_cfg.vocab_size != corpus.vocab.size() || asr_cfg.feature_dim != corpus.config.feature_dim)
    throw ConfigError("pretrain: model vocab/feature sizes do not match the corpus");

  ResumePoint rp = open_run(opts, Phase::kPretrain);
  RunLedger& ledger = rp.ledger;
  AsrModel model(asr_cfg, cfg.seed);
  Adam adam(cfg.adam_pretrain, model.params());
  int64_t global_step = 0;
  int first_epoch = 1;
  if (rp.checkpoint) {
    if (to_json(rp.checkpoint->asr_config) != to_json(asr_cfg))
      throw ConfigError("resume: checkpoint model config differs from the requested one");
    model.params().assign(rp.checkpoint->asr_params);
    if (rp.checkpoint->asr_optimizer) rp.checkpoint->asr_optimizer->apply_to(adam);
    global_step = rp.checkpoint->global_step;
    first_epoch = rp.checkpoint->epoch + 1;
  }

  int iterations = 0;
  for (int epoch = first_epoch; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const Schedule sched = epoch_schedule(corpus.train.size(), cfg, epoch);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.phase = phase_name(Phase::kPretrain);
    size_t n_micro = 0;
    bool stop = false;
    for (const auto& [begin, end] : sched.groups) {
      GradSet grads = zero_grads(model.params());
      for (size_t mb = begin; mb < end; ++mb) {
        const Batch batch = training_batch(corpus, sched.micro_batches[mb], cfg, epoch);
        auto rng = stream(cfg, epoch, mb, kDropout);
        const AsrLoss loss = asr_loss(model, batch, cfg.alpha, ForwardContext{true, &rng});
        check_finite(loss.total.scalar(), "training loss", epoch, iterations + 1);
        accumulate_grads(loss.total, model.params(), grads);
        rec.loss_total += loss.total.scalar();
        rec.loss_s2s += loss.s2s.scalar();
        rec.loss_ctc += loss.ctc.scalar();
        ++n_micro;
      }
      scale_grads(grads, 1.0 / static_cast<double>(end - begin));
      check_finite(grads, model.params(), epoch, iterations + 1);
      ++global_step;
      adam.step(model.params(), grads,
                lr_schedule(global_step, cfg.warmup, asr_cfg.d_att, cfg.lr_scale));
      ++rec.updates;
      ++iterations;
      if (opts.max_iterations > 0 && iterations >= opts.max_iterations) {
        stop = true;
        break;
      }
    }
    const double n = static_cast<double>(std::max<size_t>(1, n_micro));
    rec.loss_total /= n;
    rec.loss_s2s /= n;
    rec.loss_ctc /= n;
    rec.val_accuracy = dev_accuracy(model, corpus);
    rec.wall_time = opts.record_wall_time ? seconds_since(t0) : 0.0;

    Checkpoint ckpt;
    ckpt.asr_config = asr_cfg;
    ckpt.asr_params = model.params();
    ckpt.asr_optimizer = OptimizerState::capture(adam);
    ckpt.phase = rec.phase;
    ckpt.epoch = epoch;
    ckpt.validation_accuracy = rec.val_accuracy;
    ckpt.global_step = global_step;
    finish_epoch(ledger, rec, ckpt, cfg, opts);
    if (stop) break;
  }
  return ledger;
}

RunLedger finetune(const Checkpoint& initial, const Corpus& corpus, const TrainConfig& cfg,
                   const RunOptions& opts) {
  validate(cfg);
  check_compatible(initial, corpus);
  const bool adversarial = cfg.phase != Phase::kFinetuneBaseline;
  if (cfg.phase == Phase::kPretrain) throw ConfigError("finetune: phase must be a fine-tuning phase");

  DiscriminatorConfig dcfg = cfg.discriminator;
  dcfg.vocab_size = corpus.vocab.size();
  if (adversarial) {
    for (const auto& u : corpus.train)
      if (static_cast<int>(u.transcript.size()) < dcfg.min_length())
        throw ConfigError("finetune: utterance " + u.id + " is shorter than the critic's minimum " +
                          std::to_string(dcfg.min_length()) + " tokens");
  }

  ResumePoint rp = open_run(opts, cfg.phase);
  RunLedger& ledger = rp.ledger;
  AsrModel model(initial.asr_config, initial.asr_params.clone());
  Discriminator disc(dcfg, make_rng({cfg.seed, kCriticInit})());
  Adam adam_theta(cfg.adam_finetune, model.params());
  Adam adam_w(cfg.adam_finetune, disc.params());
  int first_epoch = 1;
  if (rp.checkpoint) {
    check_compatible(*rp.checkpoint, corpus);
    model.params().assign(rp.checkpoint->asr_params);
    if (rp.checkpoint->asr_optimizer) rp.checkpoint->asr_optimizer->apply_to(adam_theta);
    if (adversarial) {
      if (!rp.checkpoint->discriminator)
        throw MissingArtifactError("resume: checkpoint lacks the critic state");
      disc.params().assign(rp.checkpoint->discriminator->params);
      if (rp.checkpoint->discriminator->optimizer)
        rp.checkpoint->discriminator->optimizer->apply_to(adam_w);
    }
    first_epoch = rp.checkpoint->epoch + 1;
  }

  const int epochs = cfg.resolved_finetune_epochs();
  const Critic critic = disc.critic();
  const bool tracing = static_cast<bool>(opts.on_iteration);
  int iterations = 0;
  for (int epoch = first_epoch; epoch <= epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const Schedule sched = epoch_schedule(corpus.train.size(), cfg, epoch);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.phase = phase_name(cfg.phase);
    size_t n_micro = 0, n_critic_terms = 0;
    bool stop = false;
    for (const auto& [begin, end] : sched.groups) {
      ++iterations;
      const double inv_group = 1.0 / static_cast<double>(end - begin);
      std::vector<Batch> batches;
      for (size_t mb = begin; mb < end; ++mb)
        batches.push_back(training_batch(corpus, sched.micro_batches[mb], cfg, epoch));
      IterationTrace trace;
      trace.epoch = epoch;
      trace.iteration = iterations;

      if (adversarial) {
        // (1) soft outputs of the current model, as plain values.
        std::vector<std::vector<Matrix>> fakes;
        {
          ag::NoGradGuard no_grad;
          for (size_t k = 0; k < batches.size(); ++k) {
            auto rng = stream(cfg, epoch, begin + k, kFakeDropout);
            std::vector<Matrix> f;
            for (const auto& v : soft_output(model, batches[k], ForwardContext{true, &rng}))
              f.push_back(v.value());
            fakes.push_back(std::move(f));
          }
        }
        // (2) critic update with the model frozen.
        if (tracing) {
          trace.theta_before_critic = model.params().digest();
          trace.critic_before_critic = disc.params().digest();
        }
        for (int c = 0; c < cfg.n_critic; ++c) {
          GradSet grads = zero_grads(disc.params());
          double loss_d = 0.0;
          for (size_t k = 0; k < batches.size(); ++k) {
            auto rng = stream(cfg, epoch, begin + k, kGamma, static_cast<uint64_t>(c));
            const DiscriminatorLoss dl =
                discriminator_loss(critic, real_sequences(batches[k]), fakes[k], cfg.gan, rng);
            check_finite(dl.total.scalar(), "critic loss", epoch, iterations);
            accumulate_grads(dl.total, disc.params(), grads);
            loss_d += dl.total.scalar() * inv_group;
            rec.loss_d += dl.total.scalar();
            rec.gp += dl.gp;
            rec.d_real += dl.mean_real;
            rec.d_fake += dl.mean_fake;
            ++n_critic_terms;
          }
          scale_grads(grads, inv_group);
          check_finite(grads, disc.params(), epoch, iterations);
          adam_w.step(disc.params(), grads);
          trace.loss_d = loss_d;
        }
        if (tracing) {
          trace.theta_after_critic = model.params().digest();
          trace.critic_after_critic = disc.params().digest();
        }
      }

      // (3) model update with the critic frozen.
      if (tracing) {
        trace.theta_before_generator = model.params().digest();
        trace.critic_before_generator = disc.params().digest();
      }
      GradSet grads = zero_grads(model.params());
      double loss_ft = 0.0;
      for (size_t k = 0; k < batches.size(); ++k) {
        auto rng = stream(cfg, epoch, begin + k, kDropout);
        const ForwardContext ctx{true, &rng};
        const std::vector<ItemForward> fwd = forward_batch(model, batches[k], ctx);
        const AsrLoss loss = asr_loss(model, batches[k], fwd, cfg.alpha);
        ag::Var total = loss.total;
        if (adversarial) {
          const AdversarialTerm adv =
              generator_adversarial_term(critic, soft_output(fwd, batches[k]), cfg.gan.lambda_d);
          total = ag::add(total, adv.term);
          rec.adv_term += adv.term.scalar();
        }
        check_finite(total.scalar(), "fine-tuning loss", epoch, iterations);
        accumulate_grads(total, model.params(), grads);
        loss_ft += total.scalar() * inv_group;
        rec.loss_total += total.scalar();
        rec.loss_s2s += loss.s2s.scalar();
        rec.loss_ctc += loss.ctc.scalar();
        ++n_micro;
      }
      scale_grads(grads, inv_group);
      check_finite(grads, model.params(), epoch, iterations);
      adam_theta.step(model.params(), grads);
      ++rec.updates;
      trace.loss_ft = loss_ft;
      if (tracing) {
        trace.theta_after_generator = model.params().digest();
        trace.critic_after_generator = disc.params().digest();
        opts.on_iteration(trace);
      }
      if (opts.max_iterations > 0 && iterations >= opts.max_iterations) {
        stop = true;
        break;
      }
    }
    const double n = static_cast<double>(std::max<size_t>(1, n_micro));
    rec.loss_total /= n;
    rec.loss_s2s /= n;
    rec.loss_ctc /= n;
    rec.adv_term /= n;
    if (n_critic_terms > 0) {
      const double nc = static_cast<double>(n_critic_terms);
      rec.loss_d /= nc;
      rec.gp /= nc;
      rec.d_real /= nc;
      rec.d_fake /= nc;
    }
    rec.val_accuracy = dev_accuracy(model, corpus);
    rec.wall_time = opts.record_wall_time ? seconds_since(t0) : 0.0;

    Checkpoint ckpt;
    ckpt.asr_config = initial.asr_config;
    ckpt.asr_params = model.params();
    ckpt.asr_optimizer = OptimizerState::capture(adam_theta);
    if (adversarial)
      ckpt.discriminator = DiscriminatorBlock{dcfg, disc.params(), OptimizerState::capture(adam_w)};
    ckpt.phase = rec.phase;
    ckpt.epoch = epoch;
    ckpt.validation_accuracy = rec.val_accuracy;
    ckpt.global_step = adam_theta.steps();
    finish_epoch(ledger, rec, ckpt, cfg, opts);
    if (stop) break;
  }
  return ledger;
}

namespace {

RunLedger finetune_from_file(const std::string& path, const Corpus& corpus, TrainConfig cfg,
                             Phase phase, const RunOptions& opts) {
  cfg.phase = phase;
  validate(cfg);
  const Checkpoint initial = read_checkpoint(path);
  check_compatible(initial, corpus);
  return finetune(initial, corpus, cfg, opts);
}

}  // namespace

RunLedger finetune_gan(const std::string& checkpoint_path, const Corpus& corpus,
                       const TrainConfig& cfg, const RunOptions& opts) {
  return finetune_from_file(checkpoint_path, corpus, cfg, Phase::kFinetuneGan, opts);
}

RunLedger finetune_baseline(const std::string& checkpoint_path, const Corpus& corpus,
                            const TrainConfig& cfg, const RunOptions& opts) {
  return finetune_from_file(checkpoint_path, corpus, cfg, Phase::kFinetuneBaseline, opts);
}

RunLedger finetune_gan_from_scratch(const Corpus& corpus, const AsrConfig& asr_cfg,
                                    const TrainConfig& cfg, const RunOptions& opts) {
  TrainConfig c = cfg;
  c.phase = Phase::kFinetuneGanScratch;
  validate(asr_cfg);
  Checkpoint initial;
  initial.asr_config = asr_cfg;
  initial.asr_params = AsrModel(asr_cfg, c.seed).params();
  initial.phase = "init";
  return finetune(initial, corpus, c, opts);
}

Checkpoint average_checkpoints(const std::vector<Checkpoint>& cks) {
  if (cks.empty()) throw MissingArtifactError("average: no checkpoints");
  const ParamSet& first = cks.front().asr_params;
  for (const auto& c : cks)
    if (c.asr_params.names() != first.names() || to_json(c.asr_config) != to_json(cks.front().asr_config))
      throw MissingArtifactError("average: checkpoints have different model layouts");

  ParamSet out = first.clone();
  const double k = static_cast<double>(cks.size());
  for (size_t p = 0; p < first.size(); ++p) {
    Matrix sum = first.vars()[p].value();
    Matrix lo = sum, hi = sum;
    for (size_t c = 1; c < cks.size(); ++c) {
      const Matrix& v = cks[c].asr_params.vars()[p].value();
      if (v.rows() != sum.rows() || v.cols() != sum.cols())
        throw MissingArtifactError("average: shape mismatch for " + first.names()[p]);
      sum += v;
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
    Matrix mean = sum / k;
    // Where all inputs agree, keep the value exactly.
    for (Eigen::Index i = 0; i < mean.size(); ++i)
      if (lo.data()[i] == hi.data()[i]) mean.data()[i] = lo.data()[i];
    out.vars()[p].mutable_value() = mean;
  }
  Checkpoint result;
  result.asr_config = cks.front().asr_config;
  result.asr_params = std::move(out);
  result.phase = "average";
  return result;
}

Checkpoint average_checkpoints(const RunLedger& ledger, int k) {
  if (k < 1) throw ConfigError("average: k must be at least 1");
  std::vector<const EpochRecord*> rows;
  for (const auto& r : ledger.records())
    if (!r.checkpoint.empty() && fs::exists(ledger.checkpoint_path(r))) rows.push_back(&r);
  if (static_cast<int>(rows.size()) < k)
    throw MissingArtifactError("average: need " + std::to_string(k) + " checkpoints, found " +
                               std::to_string(rows.size()));
  std::stable_sort(rows.begin(), rows.end(), [](const EpochRecord* a, const EpochRecord* b) {
    return a->val_accuracy > b->val_accuracy;
  });
  std::vector<Checkpoint> cks;
  for (int i = 0; i < k; ++i) cks.push_back(read_checkpoint(ledger.checkpoint_path(*rows[i])));
  return average_checkpoints(cks);
}

}  // namespace ftgan
