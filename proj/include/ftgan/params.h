// ftgan/params.h
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

#ifndef FTGAN_PARAMS_H_
#define FTGAN_PARAMS_H_

#include <cstdint>
#include <initializer_list>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "ftgan/autograd.h"

namespace ftgan {

using ag::Matrix;

// Ordered collection of named trainable arrays. Insertion order is the
// serialization order.
class ParamSet {
 public:
  // Throws std::invalid_argument on a duplicate name.
  ag::Var& add(const std::string& name, Matrix init);

  const ag::Var& at(const std::string& name) const;
  ag::Var& at(const std::string& name);
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  size_t size() const { return vars_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<ag::Var>& vars() const { return vars_; }
  std::vector<ag::Var>& vars() { return vars_; }
  size_t num_scalars() const;

  // Deep copy with fresh leaves.
  ParamSet clone() const;
  // Copies values from `other`; names and shapes must match.
  void assign(const ParamSet& other);

  // Hex SHA-256 over names, shapes and little-endian values.
  std::string digest() const;

 private:
  std::vector<std::string> names_;
  std::vector<ag::Var> vars_;
  std::map<std::string, size_t> index_;
};

// Named gradient arrays aligned with a ParamSet.
using GradSet = std::vector<Matrix>;

GradSet zero_grads(const ParamSet& params);
// Accumulates d(loss)/d(params) into `grads` (first order).
void accumulate_grads(const ag::Var& loss, const ParamSet& params, GradSet& grads);

Matrix xavier_uniform(Eigen::Index fan_in, Eigen::Index fan_out, std::mt19937_64& rng);
Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, double stddev,
                     std::mt19937_64& rng);

// Generator seeded from a tuple of integers (base seed, epoch, item, ...).
std::mt19937_64 make_rng(std::initializer_list<uint64_t> parts);

// Hex SHA-256 of a byte buffer.
std::string sha256_hex(const std::string& bytes);

}  // namespace ftgan

#endif  // FTGAN_PARAMS_H_
