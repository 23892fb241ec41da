// ftgan/corpus.h
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
// Synthetic speech-like corpus: every content token owns a fixed prototype
// feature vector, an utterance repeats each token's prototype for a few
// frames and adds Gaussian noise. Also tokenization, padded batching and
// SpecAugment-style masking.

#ifndef FTGAN_CORPUS_H_
#define FTGAN_CORPUS_H_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ftgan/autograd.h"
#include "ftgan/json_util.h"

namespace ftgan {

using ag::Matrix;
using TokenSequence = std::vector<int>;

class Vocab {
 public:
  static constexpr int kBlank = 0;
  static constexpr int kPad = 1;
  static constexpr int kSos = 2;
  static constexpr int kEos = 3;
  static constexpr int kFirstContent = 4;

  Vocab() = default;
  // Content symbols must be distinct single characters.
  explicit Vocab(std::vector<std::string> content_symbols);
  // 'a', 'b', ... up to 26 symbols.
  static Vocab letters(int num_content);

  int size() const { return static_cast<int>(symbols_.size()); }
  int num_content() const { return size() - kFirstContent; }
  bool is_content(int id) const { return id >= kFirstContent && id < size(); }
  const std::string& symbol(int id) const;
  // Throws std::invalid_argument for unknown symbols.
  int id(const std::string& symbol) const;
  const std::vector<std::string>& symbols() const { return symbols_; }

 private:
  std::vector<std::string> symbols_;
};

// Throws std::invalid_argument on a character outside the vocabulary.
TokenSequence tokenize(const std::string& text, const Vocab& vocab);
// Throws std::invalid_argument on reserved or out-of-range ids.
std::string detokenize(const TokenSequence& tokens, const Vocab& vocab);

struct Utterance {
  std::string id;
  Matrix features;  // frames x feature_dim
  TokenSequence transcript;
};

struct CorpusConfig {
  int num_content_tokens = 10;
  int feature_dim = 20;
  int min_length = 3;
  int max_length = 8;
  int min_frames_per_token = 6;
  int max_frames_per_token = 8;
  double noise_stddev = 0.8;
  // Probability that the next token is the previous token's fixed successor
  // rather than a uniform draw; gives the bigram LM something to learn.
  double markov_bias = 0.5;
  uint64_t seed = 1;
  int train_size = 320;
  int dev_size = 40;
  int test_size = 40;
};

void validate(const CorpusConfig& cfg);
Json to_json(const CorpusConfig& cfg);
CorpusConfig corpus_config_from_json(const Json& j);

struct Corpus {
  CorpusConfig config;
  Vocab vocab;
  Matrix prototypes;  // num_content x feature_dim
  std::vector<Utterance> train;
  std::vector<Utterance> dev;
  std::vector<Utterance> test;
};

// Feature rows for `transcript`: each token's prototype row repeated
// frames_per_token[i] times, plus N(0, noise_stddev^2) noise per cell.
Matrix render_features(const Matrix& prototypes, const TokenSequence& transcript,
                       const std::vector<int>& frames_per_token, double noise_stddev,
                       std::mt19937_64& rng);

// Deterministic in cfg. Throws ConfigError for configs that cannot keep
// every utterance CTC-feasible after subsampling.
Corpus generate_corpus(const CorpusConfig& cfg);

struct Batch {
  std::vector<std::string> ids;
  std::vector<Matrix> features;  // each max_frames x feature_dim, zero padded
  std::vector<int> feature_lengths;
  std::vector<TokenSequence> targets;  // each max_length, pad-id padded
  std::vector<int> target_lengths;
  // max_length x V per item; valid rows are one-hot on the target, padded
  // rows one-hot on the pad id.
  std::vector<Matrix> real_onehot;

  size_t size() const { return ids.size(); }
  // Unpadded views of item i.
  Matrix item_features(size_t i) const;
  TokenSequence item_targets(size_t i) const;
};

// Throws std::invalid_argument on an empty list.
Batch make_batch(const std::vector<const Utterance*>& items, const Vocab& vocab);
Batch make_batch(const std::vector<Utterance>& items, const Vocab& vocab);

struct SpecAugmentPolicy {
  int num_freq_masks = 2;
  int min_freq_width = 0;
  int max_freq_width = 4;
  int num_time_masks = 2;
  int min_time_width = 0;
  int max_time_width = 4;
};

Json to_json(const SpecAugmentPolicy& p);
SpecAugmentPolicy spec_augment_policy_from_json(const Json& j);

// Zeroes random frequency bands and time spans. Widths larger than the
// matrix are clamped.
Matrix spec_augment(const Matrix& features, const SpecAugmentPolicy& policy, uint64_t seed);

// Versioned text manifest with inline feature matrices.
inline constexpr const char* kCorpusFormat = "ftgan-corpus/1";
std::string serialize_corpus(const Corpus& corpus);
Corpus parse_corpus(const std::string& text);
void write_corpus(const std::string& path, const Corpus& corpus);
Corpus read_corpus(const std::string& path);
std::string corpus_hash(const Corpus& corpus);

}  // namespace ftgan

#endif  // FTGAN_CORPUS_H_
