// tests/test_util.h
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

#ifndef FTGAN_TESTS_TEST_UTIL_H_
#define FTGAN_TESTS_TEST_UTIL_H_

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include "ftgan/asr_model.h"
#include "ftgan/autograd.h"
#include "ftgan/corpus.h"
#include "ftgan/params.h"

namespace ftgan::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("ftgan-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }

 private:
  std::filesystem::path path_;
};

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                            double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

inline Matrix log_softmax(const Matrix& logits) {
  Matrix out = logits;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double mx = out.row(r).maxCoeff();
    const double lse = mx + std::log((out.row(r).array() - mx).exp().sum());
    out.row(r).array() -= lse;
  }
  return out;
}

// Central difference of f with respect to entry i of a leaf.
inline double central_difference(ag::Var& leaf, Eigen::Index i, const std::function<double()>& f,
                                 double h = 1e-5) {
  double& x = leaf.mutable_value().data()[i];
  const double orig = x;
  x = orig + h;
  const double up = f();
  x = orig - h;
  const double down = f();
  x = orig;
  return (up - down) / (2.0 * h);
}

inline double relative_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max(floor, std::max(std::abs(a), std::abs(b)));
}

// Small corpus that trains in seconds.
inline CorpusConfig tiny_corpus_config(uint64_t seed = 1) {
  CorpusConfig c;
  c.num_content_tokens = 4;
  c.feature_dim = 8;
  c.min_length = 3;
  c.max_length = 4;
  c.seed = seed;
  c.train_size = 8;
  c.dev_size = 4;
  c.test_size = 4;
  return c;
}

inline AsrConfig tiny_asr_config(int vocab_size, int feature_dim) {
  AsrConfig a;
  a.encoder_layers = 1;
  a.decoder_layers = 1;
  a.d_att = 8;
  a.d_ff = 16;
  a.heads = 2;
  a.conv_channels = 2;
  a.vocab_size = vocab_size;
  a.feature_dim = feature_dim;
  a.dropout = 0.0;
  return a;
}

}  // namespace ftgan::testing

#endif  // FTGAN_TESTS_TEST_UTIL_H_
