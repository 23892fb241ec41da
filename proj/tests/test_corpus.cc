// tests/test_corpus.cc
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

#include <random>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "ftgan/corpus.h"
#include "ftgan/errors.h"
#include "ftgan/params.h"
#include "ftgan/shapes.h"
#include "test_util.h"

namespace ftgan {
namespace {

bool identical(const Corpus& a, const Corpus& b) {
  if (a.prototypes != b.prototypes) return false;
  auto same = [](const std::vector<Utterance>& x, const std::vector<Utterance>& y) {
    if (x.size() != y.size()) return false;
    for (size_t i = 0; i < x.size(); ++i)
      if (x[i].id != y[i].id || x[i].transcript != y[i].transcript ||
          x[i].features != y[i].features)
        return false;
    return true;
  };
  return same(a.train, b.train) && same(a.dev, b.dev) && same(a.test, b.test);
}

TEST_CASE("vocab reserves the special ids") {
  const Vocab v = Vocab::letters(3);
  CHECK(v.size() == 7);
  CHECK(v.id("a") == Vocab::kFirstContent);
  std::set<std::string> seen(v.symbols().begin(), v.symbols().end());
  CHECK(seen.size() == v.symbols().size());
  CHECK_THROWS_AS(Vocab({"a", "a"}), std::invalid_argument);
}

TEST_CASE("tokenize round trips") {
  const Vocab v = Vocab::letters(4);
  CHECK(tokenize("", v).empty());
  CHECK(detokenize({}, v).empty());
  CHECK(tokenize("ab", v) == TokenSequence{v.id("a"), v.id("b")});
  CHECK(detokenize(tokenize("dcba", v), v) == "dcba");
  for (int id : tokenize("abcd", v)) CHECK(v.is_content(id));
  CHECK_THROWS_AS(tokenize("abz", v), std::invalid_argument);
  CHECK_THROWS_AS(detokenize({Vocab::kEos}, v), std::invalid_argument);
}

TEST_CASE("noiseless features repeat the prototype") {
  CorpusConfig cfg = testing::tiny_corpus_config();
  const Corpus c = generate_corpus(cfg);
  std::mt19937_64 rng(1);
  const Matrix f = render_features(c.prototypes, tokenize("a", c.vocab), {3}, 0.0, rng);
  REQUIRE(f.rows() == 3);
  for (int r = 0; r < 3; ++r) CHECK(f.row(r) == c.prototypes.row(0));
}

TEST_CASE("generation is deterministic and seed dependent") {
  const CorpusConfig cfg = testing::tiny_corpus_config(4);
  CHECK(identical(generate_corpus(cfg), generate_corpus(cfg)));
  CHECK_FALSE(identical(generate_corpus(cfg), generate_corpus(testing::tiny_corpus_config(5))));
}

TEST_CASE("length scan over a wide config") {
  CorpusConfig cfg;
  cfg.num_content_tokens = 10;
  cfg.min_length = 3;
  cfg.max_length = 12;
  cfg.train_size = 200;
  const Corpus c = generate_corpus(cfg);
  std::set<size_t> lengths;
  std::set<std::string> ids;
  for (const auto* split : {&c.train, &c.dev, &c.test}) {
    for (const Utterance& u : *split) {
      CHECK(u.transcript.size() >= 3);
      CHECK(u.transcript.size() <= 12);
      lengths.insert(u.transcript.size());
      CHECK(ids.insert(u.id).second);
      for (int t : u.transcript) CHECK(c.vocab.is_content(t));
      CHECK(u.features.cols() == cfg.feature_dim);
      CHECK(subsample_length(static_cast<int>(u.features.rows())) >=
            ctc_min_frames(u.transcript));
    }
  }
  CHECK(lengths.size() == 10);
}

TEST_CASE("infeasible configs are rejected") {
  CorpusConfig cfg = testing::tiny_corpus_config();
  cfg.min_frames_per_token = 2;
  cfg.max_frames_per_token = 2;
  CHECK_THROWS_AS(generate_corpus(cfg), ConfigError);
  cfg = testing::tiny_corpus_config();
  cfg.train_size = 0;
  CHECK_THROWS_AS(generate_corpus(cfg), ConfigError);
}

TEST_CASE("batch padding and one-hot targets") {
  const Vocab v = Vocab::letters(4);
  std::mt19937_64 rng(2);
  Utterance a{"a", testing::random_matrix(9, 8, rng), tokenize("abcd", v)};
  Utterance b{"b", testing::random_matrix(14, 8, rng), tokenize("abcdabc", v)};

  SUBCASE("singleton") {
    const Batch batch = make_batch(std::vector<Utterance>{a}, v);
    CHECK(batch.feature_lengths == std::vector<int>{9});
    CHECK(batch.target_lengths == std::vector<int>{4});
    CHECK(batch.item_features(0) == a.features);
    CHECK(batch.item_targets(0) == a.transcript);
  }
  SUBCASE("two items") {
    const Batch batch = make_batch(std::vector<Utterance>{a, b}, v);
    CHECK(batch.target_lengths == std::vector<int>{4, 7});
    CHECK(batch.targets[0].size() == 7);
    CHECK(batch.targets[0][5] == Vocab::kPad);
    CHECK(batch.features[0].rows() == 14);
    CHECK(batch.features[0].bottomRows(5).isZero());
    CHECK(batch.item_features(1) == b.features);
    for (size_t i = 0; i < 2; ++i) {
      const Matrix& oh = batch.real_onehot[i];
      CHECK(oh.rows() == 7);
      CHECK(oh.cols() == v.size());
      for (Eigen::Index r = 0; r < oh.rows(); ++r) {
        CHECK(oh.row(r).sum() == 1.0);
        CHECK((oh.row(r).array() == 0.0).count() == v.size() - 1);
        CHECK(oh(r, batch.targets[i][static_cast<size_t>(r)]) == 1.0);
      }
    }
  }
  CHECK_THROWS_AS(make_batch(std::vector<Utterance>{}, v), std::invalid_argument);
}

TEST_CASE("SpecAugment masks") {
  std::mt19937_64 rng(9);
  const Matrix f = testing::random_matrix(20, 8, rng) + Matrix::Constant(20, 8, 5.0);

  SpecAugmentPolicy none;
  none.num_freq_masks = none.num_time_masks = 0;
  CHECK(spec_augment(f, none, 1) == f);

  SpecAugmentPolicy full;
  full.num_time_masks = 0;
  full.num_freq_masks = 1;
  full.min_freq_width = full.max_freq_width = 50;  // clamps to F
  CHECK(spec_augment(f, full, 1).isZero());

  SpecAugmentPolicy p;
  const Matrix a = spec_augment(f, p, 42);
  CHECK(a == spec_augment(f, p, 42));
  CHECK(a.rows() == f.rows());
  CHECK(a.cols() == f.cols());
  // Cells are either untouched or zeroed.
  for (Eigen::Index i = 0; i < f.size(); ++i)
    CHECK((a.data()[i] == f.data()[i] || a.data()[i] == 0.0));
}

TEST_CASE("corpus manifest round trip") {
  const Corpus c = generate_corpus(testing::tiny_corpus_config(3));
  const Corpus back = parse_corpus(serialize_corpus(c));
  CHECK(identical(c, back));
  CHECK(corpus_hash(c) == corpus_hash(back));
  CHECK(corpus_hash(c) != corpus_hash(generate_corpus(testing::tiny_corpus_config(4))));

  testing::TempDir dir("corpus");
  const std::string path = dir.str() + "/corpus.json";
  write_corpus(path, c);
  CHECK(corpus_hash(read_corpus(path)) == corpus_hash(c));
  CHECK_THROWS_AS(read_corpus(dir.str() + "/missing.json"), MissingArtifactError);
  CHECK_THROWS_AS(parse_corpus("{\"format\": \"other\"}"), MissingArtifactError);
}

}  // namespace
}  // namespace ftgan
