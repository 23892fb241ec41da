// ftgan/config.h
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
// One JSON document describing a whole experiment:
//
//   {
//     "output_dir": "toy",        // relative paths resolve under $FTGAN_OUTPUT_ROOT
//     "seed": 1,                  // training seed; the corpus has its own
//     "corpus": {...}, "asr": {...}, "train": {...}, "gan": {...}, "decode": {...}
//   }
//
// Every section is optional and unknown keys are rejected. asr.vocab_size and
// asr.feature_dim default to the corpus values.

#ifndef FTGAN_CONFIG_H_
#define FTGAN_CONFIG_H_

#include <cstdint>
#include <string>
#include <vector>

#include "ftgan/asr_model.h"
#include "ftgan/corpus.h"
#include "ftgan/decode.h"
#include "ftgan/gan.h"
#include "ftgan/json_util.h"
#include "ftgan/trainer.h"

namespace ftgan {

inline constexpr const char* kOutputRootEnv = "FTGAN_OUTPUT_ROOT";

struct ExperimentConfig {
  std::string output_dir = "ftgan-run";
  uint64_t seed = 1;
  CorpusConfig corpus;
  AsrConfig asr;
  TrainConfig train;
  GanWeights gan;
  DecodeConfig decode;

  // Training config with the experiment seed and GAN weights folded in.
  TrainConfig resolved_train() const;
  // output_dir, under $FTGAN_OUTPUT_ROOT when relative and the variable is set.
  std::string resolved_output_dir() const;
};

// The defaults used by the toy experiments.
ExperimentConfig default_experiment();

Json to_json(const ExperimentConfig& cfg);
// Throws ConfigError on unknown keys, bad types or invalid values.
ExperimentConfig experiment_from_json(const Json& j);

// Applies "a.b.c=value" to a JSON document. The value is parsed as JSON when
// possible and taken as a string otherwise. Throws ConfigError when the
// assignment has no '='.
void apply_override(Json& doc, const std::string& assignment);

}  // namespace ftgan

#endif  // FTGAN_CONFIG_H_
