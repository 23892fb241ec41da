// ftgan/cli.h
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
// Command-line front end. Run directory layout:
//
//   <out>/corpus.json               generated corpus
//   <out>/manifest.json             config snapshots, corpus hash, phase outcomes
//   <out>/<phase>/ledger.jsonl      per-epoch records
//   <out>/<phase>/checkpoints/      one checkpoint per epoch
//   <out>/<phase>/average.ckpt      written by `average`
//   <out>/reports/                  evaluation reports and the WER table
//   <out>/plots/                    SVG training curves
//   <out>/.lock                     held while a command runs

#ifndef FTGAN_CLI_H_
#define FTGAN_CLI_H_

namespace ftgan {

inline constexpr const char* kToolVersion = "ftgan 0.1.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitMissingArtifact = 3,
  kExitDivergence = 4,
};

int run_cli(int argc, char** argv);

}  // namespace ftgan

#endif  // FTGAN_CLI_H_
