// src/config.cc
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

#include "ftgan/config.h"

#include <cstdlib>
#include <filesystem>

#include "ftgan/errors.h"

namespace ftgan {

TrainConfig ExperimentConfig::resolved_train() const {
  TrainConfig t = train;
  t.seed = seed;
  t.gan = gan;
  return t;
}

std::string ExperimentConfig::resolved_output_dir() const {
  const std::filesystem::path p(output_dir);
  const char* root = std::getenv(kOutputRootEnv);
  if (p.is_absolute() || root == nullptr || *root == '\0') return p.string();
  return (std::filesystem::path(root) / p).string();
}

ExperimentConfig default_experiment() {
  ExperimentConfig c;
  c.asr.vocab_size = Vocab::kFirstContent + c.corpus.num_content_tokens;
  c.asr.feature_dim = c.corpus.feature_dim;
  return c;
}

Json to_json(const ExperimentConfig& c) {
  Json train = to_json(c.train);
  train.erase("gan");
  train.erase("seed");
  return Json{{"output_dir", c.output_dir}, {"seed", c.seed},
              {"corpus", to_json(c.corpus)}, {"asr", to_json(c.asr)},
              {"train", train},              {"gan", to_json(c.gan)},
              {"decode", to_json(c.decode)}};
}

ExperimentConfig experiment_from_json(const Json& j) {
  const std::string where = "config";
  check_keys(j, {"output_dir", "seed", "corpus", "asr", "train", "gan", "decode"}, where);
  ExperimentConfig c = default_experiment();
  read_opt(j, "output_dir", c.output_dir, where);
  read_opt(j, "seed", c.seed, where);
  if (c.output_dir.empty()) throw ConfigError("config.output_dir must not be empty");

  if (j.contains("corpus")) c.corpus = corpus_config_from_json(j.at("corpus"));
  validate(c.corpus);

  Json asr = j.value("asr", Json::object());
  if (!asr.is_object()) throw ConfigError("config.asr: expected an object");
  const int vocab = Vocab::kFirstContent + c.corpus.num_content_tokens;
  if (!asr.contains("vocab_size")) asr["vocab_size"] = vocab;
  if (!asr.contains("feature_dim")) asr["feature_dim"] = c.corpus.feature_dim;
  c.asr = asr_config_from_json(asr);
  validate(c.asr);
  if (c.asr.vocab_size != vocab || c.asr.feature_dim != c.corpus.feature_dim)
    throw ConfigError("config.asr: vocab_size/feature_dim disagree with the corpus");

  if (j.contains("train")) {
    const Json& t = j.at("train");
    if (t.is_object() && (t.contains("gan") || t.contains("seed")))
      throw ConfigError("config.train: set 'gan' and 'seed' at the top level");
    c.train = train_config_from_json(t);
  }
  if (j.contains("gan")) c.gan = gan_weights_from_json(j.at("gan"));
  validate(c.gan);
  if (j.contains("decode")) c.decode = decode_config_from_json(j.at("decode"));
  validate(c.resolved_train());
  return c;
}

void apply_override(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  Json* node = &doc;
  size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (part.empty()) throw ConfigError("--set: empty path component in '" + key + "'");
    if (!node->is_object()) throw ConfigError("--set: '" + key + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = Json::object();
    start = dot + 1;
  }
}

}  // namespace ftgan
