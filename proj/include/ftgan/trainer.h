// ftgan/trainer.h
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
// Pretraining and adversarial fine-tuning loops.
//
// Pretraining minimises L_ASR with a warmup/decay learning rate. Fine-tuning
// alternates, per iteration:
//   1. Y_hat <- soft outputs of the current model (no gradient)
//   2. n_critic Adam steps on the critic loss L_D, model frozen
//   3. Y_hat recomputed, one Adam step on L_ASR - lambda_d * E[D(Y_hat)],
//      critic frozen
// The continued-training baseline runs the same loop without steps 1 and 2
// and without the adversarial term.
//
// Every random draw (shuffle, augmentation, dropout, interpolation weights)
// comes from a generator keyed on (seed, epoch, position, stream), so runs are
// reproducible and a resumed run replays the remaining epochs exactly.

#ifndef FTGAN_TRAINER_H_
#define FTGAN_TRAINER_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ftgan/asr_model.h"
#include "ftgan/checkpoint.h"
#include "ftgan/corpus.h"
#include "ftgan/gan.h"
#include "ftgan/json_util.h"
#include "ftgan/optim.h"

namespace ftgan {

enum class Phase { kPretrain, kFinetuneGan, kFinetuneBaseline, kFinetuneGanScratch };

std::string phase_name(Phase p);
// Throws ConfigError on an unknown name.
Phase phase_from_name(const std::string& name);

struct TrainConfig {
  Phase phase = Phase::kPretrain;
  int epochs = 30;
  // Fine-tuning budget; 0 means half of `epochs`.
  int finetune_epochs = 0;
  int batch_size = 16;
  int accumulation = 1;
  double alpha = 0.3;
  GanWeights gan;
  DiscriminatorConfig discriminator;
  int n_critic = 1;
  // The pretraining lr field is unused; the schedule supplies the rate.
  AdamConfig adam_pretrain{1e-3, 0.9, 0.98, 1e-9};
  AdamConfig adam_finetune{1e-4, 0.5, 0.98, 1e-9};
  int warmup = 100;
  // Peak learning rate is lr_scale / sqrt(d_att * warmup).
  double lr_scale = 0.32;
  uint64_t seed = 1;
  // Keep only the best N checkpoints by validation accuracy (plus the most
  // recent one); 0 keeps every checkpoint.
  int keep_checkpoints = 0;
  bool spec_augment = true;
  SpecAugmentPolicy spec_augment_policy;

  int resolved_finetune_epochs() const {
    return finetune_epochs > 0 ? finetune_epochs : std::max(1, epochs / 2);
  }
};

void validate(const TrainConfig& cfg);
Json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const Json& j);

struct EpochRecord {
  int epoch = 0;
  std::string phase;
  double loss_total = 0.0;  // L_ASR, or L_ASR-FT while fine-tuning
  double loss_s2s = 0.0;
  double loss_ctc = 0.0;
  double adv_term = 0.0;  // -lambda_d * E[D(Y_hat)]
  double loss_d = 0.0;
  double gp = 0.0;
  double d_real = 0.0;
  double d_fake = 0.0;
  double val_accuracy = 0.0;
  double wall_time = 0.0;
  int64_t updates = 0;
  std::string checkpoint;  // relative to the run directory
};

Json to_json(const EpochRecord& r);
EpochRecord epoch_record_from_json(const Json& j);

// Append-only, one JSON object per line in <dir>/ledger.jsonl.
class RunLedger {
 public:
  RunLedger() = default;
  explicit RunLedger(std::string dir) : dir_(std::move(dir)) {}

  const std::string& dir() const { return dir_; }
  const std::vector<EpochRecord>& records() const { return records_; }
  bool empty() const { return records_.empty(); }
  std::string path() const;
  std::string checkpoint_path(const EpochRecord& r) const;

  // Throws std::logic_error unless the epoch is strictly increasing.
  void append(const EpochRecord& r);
  // Rewrites the file from memory.
  void flush() const;
  std::string to_jsonl() const;

  // Throws MissingArtifactError when the ledger file is absent or corrupt.
  static RunLedger load(const std::string& dir);

 private:
  std::string dir_;
  std::vector<EpochRecord> records_;
};

// Parameter digests around each half of one fine-tuning iteration.
struct IterationTrace {
  int epoch = 0;
  int iteration = 0;
  std::string theta_before_critic;
  std::string theta_after_critic;
  std::string critic_before_critic;
  std::string critic_after_critic;
  std::string theta_before_generator;
  std::string theta_after_generator;
  std::string critic_before_generator;
  std::string critic_after_generator;
  double loss_d = 0.0;
  double loss_ft = 0.0;
};

struct RunOptions {
  std::string dir;
  bool resume = false;
  bool record_wall_time = true;
  // Stop after this many iterations in total (0 = no limit); the partial
  // epoch is still recorded and checkpointed.
  int max_iterations = 0;
  // Digests are only computed when this is set.
  std::function<void(const IterationTrace&)> on_iteration;
  std::function<void(const EpochRecord&)> on_epoch;
};

// Validation accuracy on the dev split in eval mode.
double dev_accuracy(const AsrModel& model, const Corpus& corpus);

RunLedger pretrain(const Corpus& corpus, const AsrConfig& asr_cfg, const TrainConfig& cfg,
                   const RunOptions& opts);

// Fine-tuning from a checkpoint file. An unreadable or incompatible
// checkpoint raises MissingArtifactError before any update.
RunLedger finetune_gan(const std::string& checkpoint_path, const Corpus& corpus,
                       const TrainConfig& cfg, const RunOptions& opts);
RunLedger finetune_baseline(const std::string& checkpoint_path, const Corpus& corpus,
                            const TrainConfig& cfg, const RunOptions& opts);
// Same loop as finetune_gan from a freshly initialised model.
RunLedger finetune_gan_from_scratch(const Corpus& corpus, const AsrConfig& asr_cfg,
                                    const TrainConfig& cfg, const RunOptions& opts);
// Shared loop; `initial` supplies the starting model parameters.
RunLedger finetune(const Checkpoint& initial, const Corpus& corpus, const TrainConfig& cfg,
                   const RunOptions& opts);

// Top-k checkpoints by validation accuracy (earlier epoch wins ties),
// averaged parameter-wise. Throws MissingArtifactError with fewer than k.
Checkpoint average_checkpoints(const RunLedger& ledger, int k);
Checkpoint average_checkpoints(const std::vector<Checkpoint>& checkpoints);

}  // namespace ftgan

#endif  // FTGAN_TRAINER_H_
