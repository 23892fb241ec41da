// src/params.cc
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

#include "ftgan/params.h"

#include <openssl/evp.h>

#include <cmath>
#include <cstring>
#include <iomanip>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace ftgan {

ag::Var& ParamSet::add(const std::string& name, Matrix init) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  index_[name] = vars_.size();
  names_.push_back(name);
  vars_.push_back(ag::parameter(std::move(init)));
  return vars_.back();
}

const ag::Var& ParamSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
  return vars_[it->second];
}

ag::Var& ParamSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
  return vars_[it->second];
}

size_t ParamSet::num_scalars() const {
  size_t n = 0;
  for (const auto& v : vars_) n += static_cast<size_t>(v.value().size());
  return n;
}

ParamSet ParamSet::clone() const {
  ParamSet out;
  for (size_t i = 0; i < vars_.size(); ++i) out.add(names_[i], vars_[i].value());
  return out;
}

void ParamSet::assign(const ParamSet& other) {
  if (other.names_ != names_) throw std::invalid_argument("ParamSet::assign: name mismatch");
  for (size_t i = 0; i < vars_.size(); ++i) {
    const Matrix& src = other.vars_[i].value();
    Matrix& dst = vars_[i].mutable_value();
    if (src.rows() != dst.rows() || src.cols() != dst.cols())
      throw std::invalid_argument("ParamSet::assign: shape mismatch for " + names_[i]);
    dst = src;
  }
}

std::string ParamSet::digest() const {
  std::string bytes;
  for (size_t i = 0; i < vars_.size(); ++i) {
    const Matrix& m = vars_[i].value();
    bytes += names_[i];
    bytes.push_back('\0');
    const int64_t shape[2] = {m.rows(), m.cols()};
    bytes.append(reinterpret_cast<const char*>(shape), sizeof(shape));
    bytes.append(reinterpret_cast<const char*>(m.data()),
                 sizeof(double) * static_cast<size_t>(m.size()));
  }
  return sha256_hex(bytes);
}

GradSet zero_grads(const ParamSet& params) {
  GradSet g;
  g.reserve(params.size());
  for (const auto& v : params.vars()) g.push_back(Matrix::Zero(v.rows(), v.cols()));
  return g;
}

void accumulate_grads(const ag::Var& loss, const ParamSet& params, GradSet& grads) {
  std::vector<ag::Var> g = ag::grad(loss, params.vars());
  for (size_t i = 0; i < g.size(); ++i) grads[i] += g[i].value();
}

Matrix xavier_uniform(Eigen::Index fan_in, Eigen::Index fan_out, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(fan_in, fan_out);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, double stddev,
                     std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

std::mt19937_64 make_rng(std::initializer_list<uint64_t> parts) {
  std::vector<uint32_t> words;
  for (uint64_t p : parts) {
    words.push_back(static_cast<uint32_t>(p & 0xffffffffu));
    words.push_back(static_cast<uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                              &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
    throw std::runtime_error("sha256: OpenSSL digest failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i)
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return os.str();
}

}  // namespace ftgan
