// src/cli.cc
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

#include "ftgan/cli.h"

#include <fcntl.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ftgan/checkpoint.h"
#include "ftgan/config.h"
#include "ftgan/decode.h"
#include "ftgan/errors.h"
#include "ftgan/io.h"
#include "ftgan/plot.h"
#include "ftgan/trainer.h"

namespace ftgan {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifestFormat = "ftgan-manifest/1";

struct GlobalFlags {
  std::string config_path;
  uint64_t seed = 0;
  bool seed_set = false;
  bool resume = false;
  bool force = false;
  std::vector<std::string> sets;
};

// Exclusive ownership of a run directory for the lifetime of the object.
class RunLock {
 public:
  explicit RunLock(const fs::path& dir) : path_(dir / ".lock") {
    fs::create_directories(dir);
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0)
      throw std::runtime_error("run directory is locked by another process (remove " +
                               path_.string() + " if it is stale)");
    const std::string pid = std::to_string(::getpid()) + "\n";
    if (::write(fd_, pid.data(), pid.size()) < 0) {
      // The pid is informational only.
    }
  }
  ~RunLock() {
    ::close(fd_);
    std::error_code ec;
    fs::remove(path_, ec);
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  fs::path path_;
  int fd_ = -1;
};

struct Context {
  ExperimentConfig cfg;
  fs::path out;
  GlobalFlags flags;

  fs::path corpus_path() const { return out / "corpus.json"; }
  fs::path manifest_path() const { return out / "manifest.json"; }
  fs::path phase_dir(Phase p) const { return out / phase_name(p); }
};

Context make_context(const GlobalFlags& flags) {
  Json doc = Json::object();
  if (!flags.config_path.empty()) {
    std::string text;
    try {
      text = read_file(flags.config_path);
    } catch (const MissingArtifactError&) {
      throw ConfigError("config file not found: " + flags.config_path);
    }
    doc = Json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("config file is not valid JSON: " + flags.config_path);
  }
  for (const auto& s : flags.sets) apply_override(doc, s);
  if (flags.seed_set) doc["seed"] = flags.seed;
  Context ctx;
  ctx.cfg = experiment_from_json(doc);
  ctx.out = ctx.cfg.resolved_output_dir();
  ctx.flags = flags;
  return ctx;
}

Json load_manifest(const Context& ctx) {
  if (!fs::exists(ctx.manifest_path())) return Json{{"format", kManifestFormat}};
  Json m = Json::parse(read_file(ctx.manifest_path().string()), nullptr, false);
  if (m.is_discarded() || m.value("format", "") != kManifestFormat)
    throw MissingArtifactError("manifest is corrupt: " + ctx.manifest_path().string());
  return m;
}

void save_manifest(const Context& ctx, Json m) {
  m["tool_version"] = kToolVersion;
  write_file_atomic(ctx.manifest_path().string(), m.dump(2) + "\n");
}

Corpus load_corpus(const Context& ctx) {
  if (!fs::exists(ctx.corpus_path()))
    throw MissingArtifactError("corpus not found: " + ctx.corpus_path().string() +
                               " (run `ftgan generate` first)");
  Corpus corpus = read_corpus(ctx.corpus_path().string());
  if (to_json(corpus.config) != to_json(ctx.cfg.corpus))
    throw ConfigError("the corpus in " + ctx.out.string() +
                      " was generated from a different corpus config; regenerate with --force");
  return corpus;
}

void print_epoch(const EpochRecord& r, int total) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << "[" << r.phase << "] epoch " << r.epoch << "/"
     << total << "  loss " << r.loss_total << "  val_acc " << r.val_accuracy;
  if (r.phase == phase_name(Phase::kFinetuneGan) ||
      r.phase == phase_name(Phase::kFinetuneGanScratch))
    os << "  L_D " << r.loss_d << "  gp " << r.gp;
  os << std::setprecision(1) << "  (" << r.wall_time << " s)";
  std::cout << os.str() << std::endl;
}

// Decides whether a phase may (re)start. Returns true when resuming.
bool prepare_phase(const Context& ctx, const Json& manifest, Phase phase) {
  const std::string name = phase_name(phase);
  const Json* entry = nullptr;
  if (manifest.contains("phases") && manifest["phases"].contains(name))
    entry = &manifest["phases"][name];
  const fs::path dir = ctx.phase_dir(phase);
  if (ctx.flags.force) {
    fs::remove_all(dir);
    return false;
  }
  if (entry && entry->value("status", "") == "complete")
    throw std::runtime_error("phase " + name + " already completed in " + ctx.out.string() +
                             "; pass --force to redo it");
  if (fs::exists(dir / "ledger.jsonl")) {
    if (ctx.flags.resume) return true;
    throw std::runtime_error("phase " + name + " was interrupted in " + dir.string() +
                             "; pass --resume to continue or --force to restart");
  }
  return false;
}

void record_phase(const Context& ctx, Phase phase, const RunLedger& ledger, const std::string& from,
                  bool complete) {
  Json manifest = load_manifest(ctx);
  Json cks = Json::array();
  for (const auto& r : ledger.records()) {
    const std::string path = ledger.checkpoint_path(r);
    if (r.checkpoint.empty() || !fs::exists(path)) continue;
    cks.push_back(Json{{"epoch", r.epoch},
                       {"path", (fs::path(phase_name(phase)) / r.checkpoint).string()},
                       {"id", checkpoint_id(read_checkpoint(path))},
                       {"val_accuracy", r.val_accuracy}});
  }
  Json entry{{"status", complete ? "complete" : "running"},
             {"config", to_json(ctx.cfg)},
             {"ledger", (fs::path(phase_name(phase)) / "ledger.jsonl").string()},
             {"epochs", ledger.records().size()},
             {"checkpoints", cks}};
  if (!ledger.empty()) entry["final_val_accuracy"] = ledger.records().back().val_accuracy;
  if (!from.empty()) entry["initialized_from"] = from;
  manifest["phases"][phase_name(phase)] = entry;
  save_manifest(ctx, manifest);
}

std::string subcommand_name(Phase phase) {
  switch (phase) {
    case Phase::kPretrain: return "pretrain";
    case Phase::kFinetuneGan: return "finetune-gan";
    case Phase::kFinetuneBaseline: return "finetune-baseline";
    case Phase::kFinetuneGanScratch: return "finetune-scratch";
  }
  return phase_name(phase);
}

// The checkpoint a phase hands on: its average if one was written, else the
// checkpoint of its final epoch.
fs::path phase_output(const Context& ctx, Phase phase) {
  const fs::path dir = ctx.phase_dir(phase);
  if (fs::exists(dir / "average.ckpt")) return dir / "average.ckpt";
  if (!fs::exists(dir / "ledger.jsonl"))
    throw MissingArtifactError("no " + phase_name(phase) + " checkpoint: " +
                               (dir / "ledger.jsonl").string() + " not found (run `ftgan " +
                               subcommand_name(phase) +
                               "` first)");
  const RunLedger ledger = RunLedger::load(dir.string());
  if (ledger.empty() || ledger.records().back().checkpoint.empty())
    throw MissingArtifactError("no " + phase_name(phase) + " checkpoint listed in " +
                               ledger.path());
  return ledger.checkpoint_path(ledger.records().back());
}

int cmd_generate(const Context& ctx) {
  RunLock lock(ctx.out);
  if (fs::exists(ctx.corpus_path()) && !ctx.flags.force)
    throw std::runtime_error("corpus already exists: " + ctx.corpus_path().string() +
                             " (pass --force to overwrite)");
  const Corpus corpus = generate_corpus(ctx.cfg.corpus);
  write_corpus(ctx.corpus_path().string(), corpus);
  Json manifest = ctx.flags.force ? Json{{"format", kManifestFormat}} : load_manifest(ctx);
  manifest["config"] = to_json(ctx.cfg);
  manifest["corpus_hash"] = corpus_hash(corpus);
  save_manifest(ctx, manifest);
  std::cout << "corpus " << ctx.corpus_path().string() << "  train/dev/test "
            << corpus.train.size() << "/" << corpus.dev.size() << "/" << corpus.test.size()
            << "  sha256 " << corpus_hash(corpus) << std::endl;
  return kExitOk;
}

int cmd_train(const Context& ctx, Phase phase, const std::string& from_flag) {
  RunLock lock(ctx.out);
  const Corpus corpus = load_corpus(ctx);
  Json manifest = load_manifest(ctx);

  std::string from;
  if (phase == Phase::kFinetuneGan || phase == Phase::kFinetuneBaseline) {
    from = from_flag.empty() ? phase_output(ctx, Phase::kPretrain).string() : from_flag;
    if (!fs::exists(from)) throw MissingArtifactError("pretrained checkpoint not found: " + from);
    // Fails before any update if the file is unusable.
    (void)read_checkpoint(from);
  }
  const bool resume = prepare_phase(ctx, manifest, phase);

  TrainConfig train = ctx.cfg.resolved_train();
  train.phase = phase;
  RunOptions opts;
  opts.dir = ctx.phase_dir(phase).string();
  opts.resume = resume;
  const int total = phase == Phase::kPretrain ? train.epochs : train.resolved_finetune_epochs();
  opts.on_epoch = [&](const EpochRecord& r) { print_epoch(r, total); };

  RunLedger partial(opts.dir);
  record_phase(ctx, phase, partial, from, false);
  RunLedger ledger;
  switch (phase) {
    case Phase::kPretrain: ledger = pretrain(corpus, ctx.cfg.asr, train, opts); break;
    case Phase::kFinetuneGan: ledger = finetune_gan(from, corpus, train, opts); break;
    case Phase::kFinetuneBaseline: ledger = finetune_baseline(from, corpus, train, opts); break;
    case Phase::kFinetuneGanScratch:
      ledger = finetune_gan_from_scratch(corpus, ctx.cfg.asr, train, opts);
      break;
  }
  record_phase(ctx, phase, ledger, from, true);
  std::cout << phase_name(phase) << " done: " << ledger.records().size() << " epochs, ledger "
            << ledger.path() << std::endl;
  return kExitOk;
}

int cmd_average(const Context& ctx, const std::string& phase_str, int k) {
  RunLock lock(ctx.out);
  const Phase phase = phase_from_name(phase_str);
  const fs::path dir = ctx.phase_dir(phase);
  if (!fs::exists(dir / "ledger.jsonl"))
    throw MissingArtifactError("ledger not found: " + (dir / "ledger.jsonl").string());
  const RunLedger ledger = RunLedger::load(dir.string());
  Checkpoint avg = average_checkpoints(ledger, k);
  const Corpus corpus = load_corpus(ctx);
  avg.validation_accuracy = dev_accuracy(AsrModel(avg.asr_config, avg.asr_params), corpus);
  const fs::path out = dir / "average.ckpt";
  write_checkpoint(out.string(), avg);

  Json manifest = load_manifest(ctx);
  manifest["averages"][phase_name(phase)] =
      Json{{"k", k},
           {"path", (fs::path(phase_name(phase)) / "average.ckpt").string()},
           {"id", checkpoint_id(avg)},
           {"val_accuracy", avg.validation_accuracy}};
  save_manifest(ctx, manifest);
  std::cout << "averaged best " << k << " of " << ledger.records().size() << " checkpoints -> "
            << out.string() << "  val_acc " << std::fixed << std::setprecision(4)
            << avg.validation_accuracy << std::endl;
  return kExitOk;
}

std::pair<std::string, std::string> split_labeled(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos) return {fs::path(s).stem().string(), s};
  return {s.substr(0, eq), s.substr(eq + 1)};
}

std::string percent(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << 100.0 * v;
  return os.str();
}

int cmd_evaluate(const Context& ctx, const std::vector<std::string>& specs) {
  RunLock lock(ctx.out);
  const Corpus corpus = load_corpus(ctx);
  const std::string hash = corpus_hash(corpus);

  std::vector<std::pair<std::string, std::string>> models;
  for (const auto& s : specs) models.push_back(split_labeled(s));
  if (models.empty()) {
    for (Phase p : {Phase::kPretrain, Phase::kFinetuneBaseline, Phase::kFinetuneGan,
                    Phase::kFinetuneGanScratch})
      if (fs::exists(ctx.phase_dir(p) / "ledger.jsonl") ||
          fs::exists(ctx.phase_dir(p) / "average.ckpt"))
        models.emplace_back(phase_name(p), phase_output(ctx, p).string());
  }
  if (models.empty())
    throw MissingArtifactError("nothing to evaluate: no checkpoints in " + ctx.out.string());

  std::vector<TokenSequence> lm_text;
  for (const auto& u : corpus.train) lm_text.push_back(u.transcript);
  const BigramLm lm = train_bigram_lm(lm_text, corpus.vocab);

  DecodeConfig no_lm = ctx.cfg.decode;
  no_lm.w_lm = 0.0;
  const bool with_lm = ctx.cfg.decode.w_lm > 0.0;
  const fs::path reports = ctx.out / "reports";
  fs::create_directories(reports);

  std::ostringstream table;
  table << "corpus " << hash << "\n\n| model | dev | test |" << (with_lm ? " dev +LM | test +LM |" : "")
        << "\n|---|---|---|" << (with_lm ? "---|---|" : "") << "\n";
  Json manifest = load_manifest(ctx);
  for (const auto& [label, path] : models) {
    if (!fs::exists(path)) throw MissingArtifactError("checkpoint not found: " + path);
    const Checkpoint ck = read_checkpoint(path);
    if (ck.asr_config.vocab_size != corpus.vocab.size() ||
        ck.asr_config.feature_dim != corpus.config.feature_dim)
      throw MissingArtifactError("checkpoint " + path + " does not match the corpus");
    const AsrModel model(ck.asr_config, ck.asr_params);
    std::map<std::string, double> cell;
    for (const auto* split : {"dev", "test"}) {
      const auto& data = std::string(split) == "dev" ? corpus.dev : corpus.test;
      for (bool use_lm : {false, true}) {
        if (use_lm && !with_lm) continue;
        EvalReport r = evaluate(model, data, use_lm ? &lm : nullptr, use_lm ? ctx.cfg.decode : no_lm);
        r.checkpoint_id = checkpoint_id(ck);
        r.corpus_hash = hash;
        r.split = split;
        const std::string name = label + "." + split + (use_lm ? ".lm" : "") + ".json";
        write_file_atomic((reports / name).string(), to_json(r, corpus.vocab).dump(2) + "\n");
        cell[std::string(split) + (use_lm ? "+lm" : "")] = r.corpus_wer;
        manifest["evaluations"][label][std::string(split) + (use_lm ? "_lm" : "")] =
            Json{{"wer", r.corpus_wer}, {"checkpoint", r.checkpoint_id}, {"report", "reports/" + name}};
      }
    }
    table << "| " << label << " | " << percent(cell["dev"]) << " | " << percent(cell["test"]) << " |";
    if (with_lm) table << " " << percent(cell["dev+lm"]) << " | " << percent(cell["test+lm"]) << " |";
    table << "\n";
  }
  write_file_atomic((reports / "wer_table.md").string(), "WER (%)\n\n" + table.str());
  save_manifest(ctx, manifest);
  std::cout << "WER (%)\n\n" << table.str() << std::flush;
  return kExitOk;
}

int cmd_plot(const Context& ctx, const std::vector<std::string>& specs) {
  RunLock lock(ctx.out);
  std::vector<std::pair<std::string, std::string>> ledgers;
  for (const auto& s : specs) {
    auto [label, path] = split_labeled(s);
    if (fs::is_directory(path)) path = (fs::path(path) / "ledger.jsonl").string();
    if (s.find('=') == std::string::npos) label = fs::path(path).parent_path().filename().string();
    ledgers.emplace_back(label, path);
  }
  if (ledgers.empty()) {
    for (Phase p : {Phase::kPretrain, Phase::kFinetuneBaseline, Phase::kFinetuneGan,
                    Phase::kFinetuneGanScratch})
      if (fs::exists(ctx.phase_dir(p) / "ledger.jsonl"))
        ledgers.emplace_back(phase_name(p), (ctx.phase_dir(p) / "ledger.jsonl").string());
  }
  if (ledgers.empty()) throw MissingArtifactError("no ledgers found in " + ctx.out.string());

  std::vector<std::pair<std::string, std::vector<Json>>> rows;
  for (const auto& [label, path] : ledgers) {
    std::istringstream in(read_file(path));
    std::vector<Json> records;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      Json j = Json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("epoch"))
        throw MissingArtifactError("ledger is corrupt: " + path);
      records.push_back(std::move(j));
    }
    if (records.empty()) throw MissingArtifactError("ledger is empty: " + path);
    rows.emplace_back(label, std::move(records));
  }

  const fs::path dir = ctx.out / "plots";
  fs::create_directories(dir);
  const std::vector<std::pair<std::string, std::string>> metrics = {
      {"val_accuracy", "validation accuracy"}, {"loss_total", "training loss"},
      {"loss_s2s", "attention loss"},          {"loss_ctc", "CTC loss"},
      {"adv_term", "adversarial term"},        {"loss_d", "critic loss"},
      {"gp", "gradient penalty"}};
  for (const auto& [key, title] : metrics) {
    std::vector<Curve> curves;
    for (const auto& [label, records] : rows) {
      Curve c;
      c.label = label;
      bool complete = true;
      for (const auto& r : records) {
        if (!r.contains(key) || !r[key].is_number()) {
          complete = false;
          break;
        }
        c.x.push_back(r["epoch"].get<double>());
        c.y.push_back(r[key].get<double>());
      }
      if (complete)
        curves.push_back(std::move(c));
      else
        std::cerr << "warning: " << label << " has no '" << key << "' field; curve skipped\n";
    }
    if (curves.empty()) continue;
    const fs::path file = dir / (key + ".svg");
    write_file_atomic(file.string(), render_svg(title, key, curves));
    std::cout << "wrote " << file.string() << std::endl;
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Adversarial fine-tuning of a joint CTC/attention speech recognizer on a "
               "synthetic corpus"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags flags;
  app.add_option("--config", flags.config_path, "Experiment config (JSON)");
  app.add_option("--seed", flags.seed, "Training seed (overrides the config)")
      ->each([&](const std::string&) { flags.seed_set = true; });
  app.add_flag("--resume", flags.resume, "Continue an interrupted phase from its last checkpoint");
  app.add_flag("--force", flags.force, "Overwrite existing outputs");
  app.add_option("--set", flags.sets, "Config override, dotted.key=value (repeatable)");

  auto* generate = app.add_subcommand("generate", "Generate the synthetic corpus");
  auto* pre = app.add_subcommand("pretrain", "Pretrain with the joint CTC/attention loss");
  std::string from;
  auto* ftgan = app.add_subcommand("finetune-gan", "Adversarial fine-tuning of a pretrained model");
  ftgan->add_option("--from", from, "Pretrained checkpoint (default: pretrain average or last)");
  auto* base = app.add_subcommand("finetune-baseline", "Continued training without the critic");
  base->add_option("--from", from, "Pretrained checkpoint (default: pretrain average or last)");
  auto* scratch = app.add_subcommand("finetune-scratch", "Adversarial training from random init");
  std::string avg_phase = "pretrain";
  int k = 5;
  auto* average = app.add_subcommand("average", "Average the best k checkpoints of a phase");
  average->add_option("--phase", avg_phase, "Phase whose checkpoints are averaged");
  average->add_option("-k", k, "Number of checkpoints")->check(CLI::PositiveNumber);
  std::vector<std::string> ckpts;
  auto* eval = app.add_subcommand("evaluate", "Decode dev/test and tabulate WER");
  eval->add_option("--checkpoint", ckpts, "label=path (repeatable; default: every phase)");
  std::vector<std::string> ledger_specs;
  auto* plot = app.add_subcommand("plot", "Plot ledger curves as SVG");
  plot->add_option("--ledger", ledger_specs, "label=path (repeatable; default: every phase)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    const Context ctx = make_context(flags);
    if (generate->parsed()) return cmd_generate(ctx);
    if (pre->parsed()) return cmd_train(ctx, Phase::kPretrain, "");
    if (ftgan->parsed()) return cmd_train(ctx, Phase::kFinetuneGan, from);
    if (base->parsed()) return cmd_train(ctx, Phase::kFinetuneBaseline, from);
    if (scratch->parsed()) return cmd_train(ctx, Phase::kFinetuneGanScratch, "");
    if (average->parsed()) return cmd_average(ctx, avg_phase, k);
    if (eval->parsed()) return cmd_evaluate(ctx, ckpts);
    if (plot->parsed()) return cmd_plot(ctx, ledger_specs);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return kExitConfig;
  } catch (const MissingArtifactError& e) {
    std::cerr << "missing dependency: " << e.what() << std::endl;
    return kExitMissingArtifact;
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << std::endl;
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace ftgan
