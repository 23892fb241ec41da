// ftgan/asr_model.h
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
// Transformer encoder-decoder with a two-layer convolutional front end and a
// CTC head, trained with the joint objective
//
//   L_ASR = (1 - alpha) * CE_smoothed(decoder) + alpha * CTC.
//
// All tensors are per utterance; a batch is a loop over its items, each
// sliced to its unpadded length.

#ifndef FTGAN_ASR_MODEL_H_
#define FTGAN_ASR_MODEL_H_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ftgan/autograd.h"
#include "ftgan/corpus.h"
#include "ftgan/json_util.h"
#include "ftgan/params.h"

namespace ftgan {

struct AsrConfig {
  int encoder_layers = 2;
  int decoder_layers = 2;
  int d_att = 64;
  int d_ff = 128;
  int heads = 2;
  int vocab_size = 14;
  int feature_dim = 20;
  int conv_channels = 16;
  double dropout = 0.1;
  double label_smoothing = 0.1;
  // Only "teacher_forced" is implemented; the field records the choice.
  std::string soft_output = "teacher_forced";

  // The two reference settings, with the toy vocabulary and features.
  static AsrConfig small(int vocab_size, int feature_dim);
  static AsrConfig large(int vocab_size, int feature_dim);
};

void validate(const AsrConfig& cfg);
Json to_json(const AsrConfig& cfg);
AsrConfig asr_config_from_json(const Json& j);

// Dropout switch and randomness for one forward pass.
struct ForwardContext {
  bool train = false;
  std::mt19937_64* rng = nullptr;

  static ForwardContext eval() { return {}; }
};

struct EncoderOutput {
  ag::Var encoded;  // n_sub x d_att
  int n_sub = 0;
};

class AsrModel {
 public:
  AsrModel(AsrConfig cfg, uint64_t seed);
  // Adopts existing parameters; names and shapes must match `cfg`.
  AsrModel(AsrConfig cfg, const ParamSet& params);

  const AsrConfig& config() const { return cfg_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  // frames x feature_dim -> subsample_length(frames) x d_att, with the
  // sinusoidal position code added. Throws for fewer than 7 frames.
  ag::Var subsample(const ag::Var& features, const ForwardContext& ctx) const;
  // Self-attention stack. Rows at or beyond `valid` are treated as padding:
  // they are never attended to.
  ag::Var encode(const ag::Var& x0, int valid, const ForwardContext& ctx) const;
  EncoderOutput encode_features(const Matrix& features, const ForwardContext& ctx) const;

  // Teacher-forced decoder log posteriors: input rows are <sos> followed by
  // `prefix`; row t predicts the token after prefix[0..t).
  ag::Var decoder_log_posteriors(const TokenSequence& prefix, const EncoderOutput& enc,
                                 const ForwardContext& ctx) const;
  ag::Var ctc_log_posteriors(const EncoderOutput& enc) const;

 private:
  void init_params(uint64_t seed);
  ag::Var attention(const std::string& prefix, const ag::Var& query, const ag::Var& memory,
                    int memory_valid, bool causal, const ForwardContext& ctx) const;
  ag::Var feed_forward(const std::string& prefix, const ag::Var& x,
                       const ForwardContext& ctx) const;
  ag::Var norm(const std::string& prefix, const ag::Var& x) const;
  ag::Var dropout(const ag::Var& x, const ForwardContext& ctx) const;
  const ag::Var& p(const std::string& name) const { return params_.at(name); }

  AsrConfig cfg_;
  ParamSet params_;
};

// Sinusoidal position code, rows x dim.
Matrix positional_encoding(int rows, int dim);

// Teacher-forced decoder posteriors for targets Y (content tokens only).
// Returns (L + 1) x V probabilities; row L predicts <eos>. Row t depends only
// on Y[0..t). Throws std::invalid_argument on reserved ids in the target.
ag::Var decoder_posteriors(const AsrModel& model, const TokenSequence& targets,
                           const EncoderOutput& enc, const ForwardContext& ctx);

// Per-item forward products shared by the loss, the soft outputs and the
// accuracy metric.
struct ItemForward {
  EncoderOutput enc;
  ag::Var decoder_log_probs;  // (L + 1) x V
  ag::Var ctc_log_probs;      // n_sub x V
};

std::vector<ItemForward> forward_batch(const AsrModel& model, const Batch& batch,
                                       const ForwardContext& ctx);

struct AsrLoss {
  ag::Var total;  // L_s2s + L_ctc
  ag::Var s2s;    // (1 - alpha) * mean CE
  ag::Var ctc;    // alpha * mean CTC NLL
  double ce_mean = 0.0;
  double ctc_mean = 0.0;
};

// Throws InfeasibleError naming the first item whose encoder output is too
// short for its target.
AsrLoss asr_loss(const AsrModel& model, const Batch& batch, const std::vector<ItemForward>& fwd,
                 double alpha);
AsrLoss asr_loss(const AsrModel& model, const Batch& batch, double alpha,
                 const ForwardContext& ctx);

// Label-smoothed cross entropy summed over rows: the target keeps
// 1 - smoothing, the rest is spread evenly over the other V - 1 ids.
ag::Var smoothed_cross_entropy(const ag::Var& log_probs, const TokenSequence& targets,
                               double smoothing);

// Y-hat per item: the first L teacher-forced posterior rows, L x V. Carries
// gradients back to the model parameters when recording is on.
std::vector<ag::Var> soft_output(const std::vector<ItemForward>& fwd, const Batch& batch);
std::vector<ag::Var> soft_output(const AsrModel& model, const Batch& batch,
                                 const ForwardContext& ctx);

// Fraction of positions whose argmax equals the reference.
double accuracy_from_posteriors(const std::vector<Matrix>& posteriors,
                                const std::vector<TokenSequence>& references);
// Teacher-forced argmax accuracy over the L content positions plus <eos>,
// in eval mode.
double validation_accuracy(const AsrModel& model, const Batch& batch);

}  // namespace ftgan

#endif  // FTGAN_ASR_MODEL_H_
