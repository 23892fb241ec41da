// tests/test_checkpoint.cc
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

#include <fstream>
#include <string>

#include "doctest.h"
#include "ftgan/checkpoint.h"
#include "ftgan/errors.h"
#include "test_util.h"

namespace ftgan {
namespace {

Checkpoint sample_checkpoint() {
  const AsrConfig cfg = testing::tiny_asr_config(8, 8);
  AsrModel model(cfg, 5);
  Checkpoint c;
  c.asr_config = cfg;
  c.asr_params = model.params();
  Adam adam(AdamConfig{}, model.params());
  GradSet g = zero_grads(model.params());
  for (auto& m : g) m.setConstant(0.5);
  adam.step(model.params(), g);
  c.asr_optimizer = OptimizerState::capture(adam);
  DiscriminatorConfig d;
  d.vocab_size = 8;
  d.projection_dim = 4;
  d.conv_channels = 3;
  Discriminator disc(d, 2);
  c.discriminator = DiscriminatorBlock{d, disc.params(), std::nullopt};
  c.phase = "finetune_gan";
  c.epoch = 7;
  c.validation_accuracy = 0.8125;
  c.global_step = 42;
  return c;
}

void check_same(const ParamSet& a, const ParamSet& b) {
  REQUIRE(a.names() == b.names());
  for (size_t i = 0; i < a.size(); ++i) CHECK(a.vars()[i].value() == b.vars()[i].value());
}

TEST_CASE("checkpoint round trip") {
  const Checkpoint c = sample_checkpoint();
  const std::string bytes = serialize_checkpoint(c);
  CHECK(bytes.substr(0, 8) == "FTGANCKP");
  const Checkpoint back = parse_checkpoint(bytes);
  CHECK(to_json(back.asr_config) == to_json(c.asr_config));
  check_same(back.asr_params, c.asr_params);
  REQUIRE(back.asr_optimizer);
  CHECK(back.asr_optimizer->steps == 1);
  for (size_t i = 0; i < c.asr_optimizer->m.size(); ++i) {
    CHECK(back.asr_optimizer->m[i] == c.asr_optimizer->m[i]);
    CHECK(back.asr_optimizer->v[i] == c.asr_optimizer->v[i]);
  }
  REQUIRE(back.discriminator);
  check_same(back.discriminator->params, c.discriminator->params);
  CHECK_FALSE(back.discriminator->optimizer);
  CHECK(back.discriminator->config.projection_dim == 4);
  CHECK(back.phase == "finetune_gan");
  CHECK(back.epoch == 7);
  CHECK(back.validation_accuracy == 0.8125);
  CHECK(back.global_step == 42);
  CHECK(checkpoint_id(back) == checkpoint_id(c));
  CHECK(serialize_checkpoint(back) == bytes);
}

TEST_CASE("checkpoint file io") {
  testing::TempDir dir("ckpt");
  const std::string path = dir.str() + "/a.ckpt";
  const Checkpoint c = sample_checkpoint();
  write_checkpoint(path, c);
  check_same(read_checkpoint(path).asr_params, c.asr_params);
  CHECK_THROWS_AS(read_checkpoint(dir.str() + "/missing.ckpt"), MissingArtifactError);
}

TEST_CASE("corrupt checkpoints are rejected") {
  const std::string bytes = serialize_checkpoint(sample_checkpoint());
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(parse_checkpoint(bad_magic), MissingArtifactError);
  std::string bad_version = bytes;
  bad_version[8] = 9;
  CHECK_THROWS_AS(parse_checkpoint(bad_version), MissingArtifactError);
  CHECK_THROWS_AS(parse_checkpoint(bytes.substr(0, bytes.size() - 8)), MissingArtifactError);
  CHECK_THROWS_AS(parse_checkpoint(bytes.substr(0, 20)), MissingArtifactError);
  CHECK_THROWS_AS(parse_checkpoint(""), MissingArtifactError);
}

}  // namespace
}  // namespace ftgan
