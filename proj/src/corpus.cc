// src/corpus.cc
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

#include "ftgan/corpus.h"

#include <algorithm>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "ftgan/errors.h"
#include "ftgan/io.h"
#include "ftgan/params.h"
#include "ftgan/shapes.h"

namespace ftgan {

Vocab::Vocab(std::vector<std::string> content_symbols) {
  symbols_ = {"<blank>", "<pad>", "<sos>", "<eos>"};
  std::set<std::string> seen;
  for (auto& s : content_symbols) {
    if (s.size() != 1) throw std::invalid_argument("Vocab: symbols must be single characters");
    if (!seen.insert(s).second) throw std::invalid_argument("Vocab: duplicate symbol " + s);
    symbols_.push_back(std::move(s));
  }
}

Vocab Vocab::letters(int num_content) {
  if (num_content < 1 || num_content > 26)
    throw std::invalid_argument("Vocab::letters: need 1..26 content symbols");
  std::vector<std::string> syms;
  for (int i = 0; i < num_content; ++i) syms.emplace_back(1, static_cast<char>('a' + i));
  return Vocab(std::move(syms));
}

const std::string& Vocab::symbol(int id) const {
  if (id < 0 || id >= size()) throw std::invalid_argument("Vocab: id out of range");
  return symbols_[static_cast<size_t>(id)];
}

int Vocab::id(const std::string& symbol) const {
  for (int i = kFirstContent; i < size(); ++i)
    if (symbols_[static_cast<size_t>(i)] == symbol) return i;
  throw std::invalid_argument("Vocab: unknown symbol '" + symbol + "'");
}

TokenSequence tokenize(const std::string& text, const Vocab& vocab) {
  TokenSequence out;
  out.reserve(text.size());
  for (char c : text) out.push_back(vocab.id(std::string(1, c)));
  return out;
}

std::string detokenize(const TokenSequence& tokens, const Vocab& vocab) {
  std::string out;
  for (int t : tokens) {
    if (!vocab.is_content(t))
      throw std::invalid_argument("detokenize: non-content id " + std::to_string(t));
    out += vocab.symbol(t);
  }
  return out;
}

void validate(const CorpusConfig& c) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("corpus: " + what);
  };
  require(c.num_content_tokens >= 2 && c.num_content_tokens <= 26,
          "num_content_tokens must be in [2, 26]");
  require(c.feature_dim >= 7, "feature_dim must be at least 7");
  require(c.min_length >= 1 && c.min_length <= c.max_length, "bad transcript length range");
  require(c.min_frames_per_token >= 1 && c.min_frames_per_token <= c.max_frames_per_token,
          "bad frames-per-token range");
  require(c.noise_stddev >= 0.0, "noise_stddev must be non-negative");
  require(c.markov_bias >= 0.0 && c.markov_bias <= 1.0, "markov_bias must be in [0, 1]");
  require(c.train_size >= 1 && c.dev_size >= 1 && c.test_size >= 1,
          "split sizes must be positive");
  for (int len = c.min_length; len <= c.max_length; ++len) {
    const int frames = len * c.min_frames_per_token;
    if (frames < 7 || subsample_length(frames) < len) {
      throw ConfigError(
          "corpus: transcripts of length " + std::to_string(len) + " with " +
          std::to_string(c.min_frames_per_token) +
          " frames per token are too short for CTC after subsampling");
    }
  }
}

Json to_json(const CorpusConfig& c) {
  return Json{{"num_content_tokens", c.num_content_tokens},
              {"feature_dim", c.feature_dim},
              {"min_length", c.min_length},
              {"max_length", c.max_length},
              {"min_frames_per_token", c.min_frames_per_token},
              {"max_frames_per_token", c.max_frames_per_token},
              {"noise_stddev", c.noise_stddev},
              {"markov_bias", c.markov_bias},
              {"seed", c.seed},
              {"train_size", c.train_size},
              {"dev_size", c.dev_size},
              {"test_size", c.test_size}};
}

CorpusConfig corpus_config_from_json(const Json& j) {
  const std::string where = "corpus";
  check_keys(j,
             {"num_content_tokens", "feature_dim", "min_length", "max_length",
              "min_frames_per_token", "max_frames_per_token", "noise_stddev", "markov_bias",
              "seed", "train_size", "dev_size", "test_size"},
             where);
  CorpusConfig c;
  read_opt(j, "num_content_tokens", c.num_content_tokens, where);
  read_opt(j, "feature_dim", c.feature_dim, where);
  read_opt(j, "min_length", c.min_length, where);
  read_opt(j, "max_length", c.max_length, where);
  read_opt(j, "min_frames_per_token", c.min_frames_per_token, where);
  read_opt(j, "max_frames_per_token", c.max_frames_per_token, where);
  read_opt(j, "noise_stddev", c.noise_stddev, where);
  read_opt(j, "markov_bias", c.markov_bias, where);
  read_opt(j, "seed", c.seed, where);
  read_opt(j, "train_size", c.train_size, where);
  read_opt(j, "dev_size", c.dev_size, where);
  read_opt(j, "test_size", c.test_size, where);
  return c;
}

namespace {

// Random successor map without fixed points, so the Markov step never
// produces an immediate repeat by itself.
std::vector<int> draw_successors(int n, std::mt19937_64& rng) {
  std::vector<int> perm(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
  if (n == 1) return perm;
  for (;;) {
    std::shuffle(perm.begin(), perm.end(), rng);
    bool fixed = false;
    for (int i = 0; i < n; ++i) fixed = fixed || perm[static_cast<size_t>(i)] == i;
    if (!fixed) return perm;
  }
}

// Adjacent tokens always differ: a repeated token would be the same
// prototype run twice, acoustically indistinguishable from one long token.
Utterance draw_utterance(const CorpusConfig& c, const Matrix& prototypes,
                         const std::vector<int>& successor, const std::string& id,
                         std::mt19937_64& rng) {
  std::uniform_int_distribution<int> len_dist(c.min_length, c.max_length);
  std::uniform_int_distribution<int> first_dist(0, c.num_content_tokens - 1);
  std::uniform_int_distribution<int> other_dist(0, c.num_content_tokens - 2);
  std::uniform_int_distribution<int> rep_dist(c.min_frames_per_token, c.max_frames_per_token);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  const int len = len_dist(rng);
  std::vector<int> content(static_cast<size_t>(len));
  std::vector<int> reps(static_cast<size_t>(len));
  for (size_t i = 0; i < content.size(); ++i) {
    if (i == 0) {
      content[i] = first_dist(rng);
    } else if (coin(rng) < c.markov_bias) {
      content[i] = successor[static_cast<size_t>(content[i - 1])];
    } else {
      const int k = other_dist(rng);
      content[i] = k < content[i - 1] ? k : k + 1;
    }
    reps[i] = rep_dist(rng);
  }
  Utterance u;
  u.id = id;
  for (int t : content) u.transcript.push_back(t + Vocab::kFirstContent);
  u.features = render_features(prototypes, u.transcript, reps, c.noise_stddev, rng);
  return u;
}

}  // namespace

Matrix render_features(const Matrix& prototypes, const TokenSequence& transcript,
                       const std::vector<int>& frames_per_token, double noise_stddev,
                       std::mt19937_64& rng) {
  if (frames_per_token.size() != transcript.size())
    throw std::invalid_argument("render_features: one frame count per token expected");
  Eigen::Index frames = 0;
  for (int r : frames_per_token) {
    if (r < 1) throw std::invalid_argument("render_features: frame counts must be positive");
    frames += r;
  }
  std::normal_distribution<double> noise(0.0, 1.0);
  Matrix out(frames, prototypes.cols());
  Eigen::Index row = 0;
  for (size_t i = 0; i < transcript.size(); ++i) {
    const int proto = transcript[i] - Vocab::kFirstContent;
    if (proto < 0 || proto >= prototypes.rows())
      throw std::invalid_argument("render_features: token without a prototype");
    for (int r = 0; r < frames_per_token[i]; ++r, ++row)
      for (Eigen::Index f = 0; f < out.cols(); ++f)
        out(row, f) = prototypes(proto, f) + (noise_stddev > 0.0 ? noise_stddev * noise(rng) : 0.0);
  }
  return out;
}

Corpus generate_corpus(const CorpusConfig& cfg) {
  validate(cfg);
  Corpus corpus;
  corpus.config = cfg;
  corpus.vocab = Vocab::letters(cfg.num_content_tokens);
  std::mt19937_64 rng = make_rng({cfg.seed, 0x636f72707573ULL});
  corpus.prototypes = normal_matrix(cfg.num_content_tokens, cfg.feature_dim, 1.0, rng);
  const std::vector<int> successor = draw_successors(cfg.num_content_tokens, rng);

  auto fill = [&](std::vector<Utterance>& out, const std::string& prefix, int n) {
    for (int i = 0; i < n; ++i) {
      std::ostringstream id;
      id << prefix << "-" << std::setw(5) << std::setfill('0') << i;
      out.push_back(draw_utterance(cfg, corpus.prototypes, successor, id.str(), rng));
    }
  };
  fill(corpus.train, "train", cfg.train_size);
  fill(corpus.dev, "dev", cfg.dev_size);
  fill(corpus.test, "test", cfg.test_size);
  return corpus;
}

Matrix Batch::item_features(size_t i) const {
  return features.at(i).topRows(feature_lengths.at(i));
}

TokenSequence Batch::item_targets(size_t i) const {
  const TokenSequence& t = targets.at(i);
  return TokenSequence(t.begin(), t.begin() + target_lengths.at(i));
}

Batch make_batch(const std::vector<const Utterance*>& items, const Vocab& vocab) {
  if (items.empty()) throw std::invalid_argument("make_batch: empty item list");
  Batch b;
  Eigen::Index max_frames = 0, dim = items.front()->features.cols();
  size_t max_len = 0;
  for (const Utterance* u : items) {
    if (u->features.cols() != dim)
      throw std::invalid_argument("make_batch: inconsistent feature dimension");
    max_frames = std::max(max_frames, u->features.rows());
    max_len = std::max(max_len, u->transcript.size());
  }
  const int V = vocab.size();
  for (const Utterance* u : items) {
    b.ids.push_back(u->id);
    Matrix f = Matrix::Zero(max_frames, dim);
    f.topRows(u->features.rows()) = u->features;
    b.features.push_back(std::move(f));
    b.feature_lengths.push_back(static_cast<int>(u->features.rows()));

    TokenSequence t(max_len, Vocab::kPad);
    std::copy(u->transcript.begin(), u->transcript.end(), t.begin());
    Matrix onehot = Matrix::Zero(static_cast<Eigen::Index>(max_len), V);
    for (size_t k = 0; k < max_len; ++k) onehot(static_cast<Eigen::Index>(k), t[k]) = 1.0;
    b.targets.push_back(std::move(t));
    b.target_lengths.push_back(static_cast<int>(u->transcript.size()));
    b.real_onehot.push_back(std::move(onehot));
  }
  return b;
}

Batch make_batch(const std::vector<Utterance>& items, const Vocab& vocab) {
  std::vector<const Utterance*> ptrs;
  for (const auto& u : items) ptrs.push_back(&u);
  return make_batch(ptrs, vocab);
}

Json to_json(const SpecAugmentPolicy& p) {
  return Json{{"num_freq_masks", p.num_freq_masks}, {"min_freq_width", p.min_freq_width},
              {"max_freq_width", p.max_freq_width}, {"num_time_masks", p.num_time_masks},
              {"min_time_width", p.min_time_width}, {"max_time_width", p.max_time_width}};
}

SpecAugmentPolicy spec_augment_policy_from_json(const Json& j) {
  const std::string where = "train.spec_augment";
  check_keys(j,
             {"num_freq_masks", "min_freq_width", "max_freq_width", "num_time_masks",
              "min_time_width", "max_time_width"},
             where);
  SpecAugmentPolicy p;
  read_opt(j, "num_freq_masks", p.num_freq_masks, where);
  read_opt(j, "min_freq_width", p.min_freq_width, where);
  read_opt(j, "max_freq_width", p.max_freq_width, where);
  read_opt(j, "num_time_masks", p.num_time_masks, where);
  read_opt(j, "min_time_width", p.min_time_width, where);
  read_opt(j, "max_time_width", p.max_time_width, where);
  return p;
}

Matrix spec_augment(const Matrix& features, const SpecAugmentPolicy& policy, uint64_t seed) {
  Matrix out = features;
  std::mt19937_64 rng = make_rng({seed, 0x73706563ULL});
  auto mask = [&](int count, int lo, int hi, Eigen::Index dim, bool freq) {
    if (dim == 0) return;
    for (int m = 0; m < count; ++m) {
      const int wmin = std::max(0, lo);
      const int wmax = std::max(wmin, hi);
      int width = std::uniform_int_distribution<int>(wmin, wmax)(rng);
      width = std::min<int>(width, static_cast<int>(dim));
      const int start =
          std::uniform_int_distribution<int>(0, static_cast<int>(dim) - width)(rng);
      if (freq)
        out.middleCols(start, width).setZero();
      else
        out.middleRows(start, width).setZero();
    }
  };
  mask(policy.num_freq_masks, policy.min_freq_width, policy.max_freq_width, out.cols(), true);
  mask(policy.num_time_masks, policy.min_time_width, policy.max_time_width, out.rows(), false);
  return out;
}

namespace {

Json utterance_to_json(const Utterance& u, const Vocab& vocab) {
  std::vector<double> flat(u.features.data(), u.features.data() + u.features.size());
  return Json{{"id", u.id},
              {"transcript", detokenize(u.transcript, vocab)},
              {"frames", u.features.rows()},
              {"dim", u.features.cols()},
              {"features", flat}};
}

Utterance utterance_from_json(const Json& j, const Vocab& vocab) {
  Utterance u;
  u.id = j.at("id").get<std::string>();
  u.transcript = tokenize(j.at("transcript").get<std::string>(), vocab);
  const auto frames = j.at("frames").get<Eigen::Index>();
  const auto dim = j.at("dim").get<Eigen::Index>();
  const auto flat = j.at("features").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(flat.size()) != frames * dim)
    throw std::invalid_argument("corpus manifest: feature size mismatch for " + u.id);
  u.features = Eigen::Map<const Matrix>(flat.data(), frames, dim);
  return u;
}

}  // namespace

std::string serialize_corpus(const Corpus& corpus) {
  Json j;
  j["format"] = kCorpusFormat;
  j["config"] = to_json(corpus.config);
  j["vocab"] = std::vector<std::string>(corpus.vocab.symbols().begin() + Vocab::kFirstContent,
                                        corpus.vocab.symbols().end());
  std::vector<double> protos(corpus.prototypes.data(),
                             corpus.prototypes.data() + corpus.prototypes.size());
  j["prototypes"] = protos;
  for (const auto& [name, split] :
       {std::pair{"train", &corpus.train}, {"dev", &corpus.dev}, {"test", &corpus.test}}) {
    Json arr = Json::array();
    for (const auto& u : *split) arr.push_back(utterance_to_json(u, corpus.vocab));
    j["splits"][name] = std::move(arr);
  }
  return j.dump() + "\n";
}

Corpus parse_corpus(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw MissingArtifactError(std::string("corpus manifest: ") + e.what());
  }
  if (j.value("format", "") != kCorpusFormat)
    throw MissingArtifactError("corpus manifest: unsupported format tag");
  Corpus c;
  c.config = corpus_config_from_json(j.at("config"));
  c.vocab = Vocab(j.at("vocab").get<std::vector<std::string>>());
  const auto protos = j.at("prototypes").get<std::vector<double>>();
  c.prototypes = Eigen::Map<const Matrix>(protos.data(), c.config.num_content_tokens,
                                          c.config.feature_dim);
  for (const auto& u : j.at("splits").at("train")) c.train.push_back(utterance_from_json(u, c.vocab));
  for (const auto& u : j.at("splits").at("dev")) c.dev.push_back(utterance_from_json(u, c.vocab));
  for (const auto& u : j.at("splits").at("test")) c.test.push_back(utterance_from_json(u, c.vocab));
  return c;
}

void write_corpus(const std::string& path, const Corpus& corpus) {
  write_file_atomic(path, serialize_corpus(corpus));
}

Corpus read_corpus(const std::string& path) { return parse_corpus(read_file(path)); }

std::string corpus_hash(const Corpus& corpus) { return sha256_hex(serialize_corpus(corpus)); }

}  // namespace ftgan
