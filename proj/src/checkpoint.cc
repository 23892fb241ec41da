// src/checkpoint.cc
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

#include "ftgan/checkpoint.h"

#include <cstring>
#include <map>

#include "ftgan/errors.h"
#include "ftgan/io.h"

namespace ftgan {

namespace {

constexpr char kMagic[8] = {'F', 'T', 'G', 'A', 'N', 'C', 'K', 'P'};

template <typename T>
void put_le(std::string& out, T v) {
  for (size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(const std::string& in, size_t at) {
  T v = 0;
  for (size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<T>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

void put_doubles(std::string& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    uint64_t bits;
    std::memcpy(&bits, m.data() + i, sizeof(bits));
    put_le<uint64_t>(out, bits);
  }
}

class ArrayWriter {
 public:
  void add(const std::string& name, const Matrix& m) {
    table_.push_back(Json{{"name", name}, {"rows", m.rows()}, {"cols", m.cols()},
                          {"offset", payload_.size()}});
    put_doubles(payload_, m);
  }
  Json table() const { return table_; }
  const std::string& payload() const { return payload_; }

 private:
  Json table_ = Json::array();
  std::string payload_;
};

void write_params(ArrayWriter& w, const std::string& prefix, const ParamSet& params) {
  for (size_t i = 0; i < params.size(); ++i)
    w.add(prefix + "/" + params.names()[i], params.vars()[i].value());
}

Json write_optimizer(ArrayWriter& w, const std::string& prefix, const ParamSet& params,
                     const OptimizerState& s) {
  for (size_t i = 0; i < params.size(); ++i) {
    w.add(prefix + ".adam.m/" + params.names()[i], s.m[i]);
    w.add(prefix + ".adam.v/" + params.names()[i], s.v[i]);
  }
  return Json{{"config", to_json(s.config)}, {"steps", s.steps}};
}

struct ArrayReader {
  std::map<std::string, Matrix> arrays;

  Matrix take(const std::string& name) {
    auto it = arrays.find(name);
    if (it == arrays.end()) throw MissingArtifactError("checkpoint: missing array " + name);
    Matrix m = std::move(it->second);
    arrays.erase(it);
    return m;
  }
};

ParamSet read_params(ArrayReader& r, const std::string& prefix, const Json& names) {
  ParamSet p;
  for (const auto& n : names) p.add(n.get<std::string>(), r.take(prefix + "/" + n.get<std::string>()));
  return p;
}

OptimizerState read_optimizer(ArrayReader& r, const std::string& prefix, const ParamSet& params,
                              const Json& j) {
  OptimizerState s;
  s.config = adam_config_from_json(j.at("config"), prefix + ".adam");
  s.steps = j.at("steps").get<int64_t>();
  for (const auto& name : params.names()) {
    s.m.push_back(r.take(prefix + ".adam.m/" + name));
    s.v.push_back(r.take(prefix + ".adam.v/" + name));
  }
  return s;
}

}  // namespace

OptimizerState OptimizerState::capture(const Adam& adam) {
  OptimizerState s;
  s.config = adam.config();
  s.steps = adam.steps();
  s.m = adam.first_moment();
  s.v = adam.second_moment();
  return s;
}

void OptimizerState::apply_to(Adam& adam) const { adam.restore(steps, m, v); }

std::string serialize_checkpoint(const Checkpoint& c) {
  ArrayWriter w;
  Json header;
  header["phase"] = c.phase;
  header["epoch"] = c.epoch;
  header["validation_accuracy"] = c.validation_accuracy;
  header["global_step"] = c.global_step;
  header["asr"]["config"] = to_json(c.asr_config);
  header["asr"]["params"] = c.asr_params.names();
  write_params(w, "asr", c.asr_params);
  if (c.asr_optimizer) header["asr"]["optimizer"] = write_optimizer(w, "asr", c.asr_params, *c.asr_optimizer);
  if (c.discriminator) {
    const DiscriminatorBlock& d = *c.discriminator;
    header["disc"]["config"] = to_json(d.config);
    header["disc"]["params"] = d.params.names();
    write_params(w, "disc", d.params);
    if (d.optimizer) header["disc"]["optimizer"] = write_optimizer(w, "disc", d.params, *d.optimizer);
  }
  header["arrays"] = w.table();
  const std::string text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  put_le<uint32_t>(out, kCheckpointVersion);
  put_le<uint64_t>(out, text.size());
  out += text;
  out += w.payload();
  return out;
}

Checkpoint parse_checkpoint(const std::string& bytes) {
  if (bytes.size() < 20 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw MissingArtifactError("checkpoint: bad magic");
  const auto version = get_le<uint32_t>(bytes, 8);
  if (version != kCheckpointVersion)
    throw MissingArtifactError("checkpoint: unsupported version " + std::to_string(version));
  const auto header_len = get_le<uint64_t>(bytes, 12);
  if (20 + header_len > bytes.size()) throw MissingArtifactError("checkpoint: truncated header");
  Json header;
  try {
    header = Json::parse(bytes.substr(20, header_len));
  } catch (const Json::exception& e) {
    throw MissingArtifactError(std::string("checkpoint: bad header: ") + e.what());
  }
  const size_t base = 20 + header_len;

  ArrayReader r;
  for (const auto& a : header.at("arrays")) {
    const auto rows = a.at("rows").get<Eigen::Index>();
    const auto cols = a.at("cols").get<Eigen::Index>();
    const auto offset = a.at("offset").get<size_t>();
    const size_t n = static_cast<size_t>(rows * cols);
    if (base + offset + 8 * n > bytes.size()) throw MissingArtifactError("checkpoint: truncated");
    Matrix m(rows, cols);
    for (size_t i = 0; i < n; ++i) {
      const auto bits = get_le<uint64_t>(bytes, base + offset + 8 * i);
      std::memcpy(m.data() + i, &bits, sizeof(bits));
    }
    r.arrays[a.at("name").get<std::string>()] = std::move(m);
  }

  Checkpoint c;
  try {
    c.phase = header.at("phase").get<std::string>();
    c.epoch = header.at("epoch").get<int>();
    c.validation_accuracy = header.at("validation_accuracy").get<double>();
    c.global_step = header.at("global_step").get<int64_t>();
    const Json& asr = header.at("asr");
    c.asr_config = asr_config_from_json(asr.at("config"));
    c.asr_params = read_params(r, "asr", asr.at("params"));
    if (asr.contains("optimizer"))
      c.asr_optimizer = read_optimizer(r, "asr", c.asr_params, asr.at("optimizer"));
    if (header.contains("disc")) {
      const Json& disc = header.at("disc");
      DiscriminatorBlock d;
      d.config = discriminator_config_from_json(disc.at("config"));
      d.params = read_params(r, "disc", disc.at("params"));
      if (disc.contains("optimizer"))
        d.optimizer = read_optimizer(r, "disc", d.params, disc.at("optimizer"));
      c.discriminator = std::move(d);
    }
  } catch (const Json::exception& e) {
    throw MissingArtifactError(std::string("checkpoint: malformed header: ") + e.what());
  }
  return c;
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint read_checkpoint(const std::string& path) { return parse_checkpoint(read_file(path)); }

std::string checkpoint_id(const Checkpoint& ckpt) { return ckpt.asr_params.digest(); }

}  // namespace ftgan
