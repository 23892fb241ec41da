// ftgan/checkpoint.h
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
// Checkpoint container, format version 1:
//
//   bytes 0..7    magic "FTGANCKP"
//   bytes 8..11   uint32 format version, little endian
//   bytes 12..19  uint64 header length H, little endian
//   next H bytes  UTF-8 JSON header (configs, epoch, accuracy, array table)
//   remainder     arrays back to back, each row-major IEEE-754 float64,
//                 little endian, at the byte offsets listed in the header
//                 (offsets relative to the start of the remainder)
//
// Array names are "asr/<param>", "asr.adam.m/<param>", "asr.adam.v/<param>"
// and the same under "disc" when a critic block is present.

#ifndef FTGAN_CHECKPOINT_H_
#define FTGAN_CHECKPOINT_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ftgan/asr_model.h"
#include "ftgan/gan.h"
#include "ftgan/optim.h"

namespace ftgan {

inline constexpr uint32_t kCheckpointVersion = 1;

struct OptimizerState {
  AdamConfig config;
  int64_t steps = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;

  static OptimizerState capture(const Adam& adam);
  void apply_to(Adam& adam) const;
};

struct DiscriminatorBlock {
  DiscriminatorConfig config;
  ParamSet params;
  std::optional<OptimizerState> optimizer;
};

struct Checkpoint {
  AsrConfig asr_config;
  ParamSet asr_params;
  std::optional<OptimizerState> asr_optimizer;
  std::optional<DiscriminatorBlock> discriminator;
  std::string phase;
  int epoch = 0;
  double validation_accuracy = 0.0;
  // Learning-rate schedule position (optimizer updates applied so far).
  int64_t global_step = 0;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
// Throws MissingArtifactError on bad magic, unknown version or truncation.
Checkpoint parse_checkpoint(const std::string& bytes);
void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

// Identity used in evaluation reports: SHA-256 of the serialized ASR
// parameters.
std::string checkpoint_id(const Checkpoint& ckpt);

}  // namespace ftgan

#endif  // FTGAN_CHECKPOINT_H_
