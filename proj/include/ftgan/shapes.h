// ftgan/shapes.h
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
// Length arithmetic shared by the corpus generator, the model front end and
// the CTC loss.

#ifndef FTGAN_SHAPES_H_
#define FTGAN_SHAPES_H_

#include <stdexcept>
#include <string>
#include <vector>

namespace ftgan {

// Output length of an unpadded kernel-3, stride-2 convolution.
inline int conv3s2_length(int n) { return n < 3 ? 0 : (n - 3) / 2 + 1; }

// Frame count after the two-layer convolutional front end.
// Requires at least 7 input frames.
inline int subsample_length(int frames) {
  if (frames < 7)
    throw std::invalid_argument("subsample_length: need at least 7 frames, got " +
                                std::to_string(frames));
  return conv3s2_length(conv3s2_length(frames));
}

// Fewest CTC frames able to emit `tokens`: one per token plus a blank
// between each pair of identical neighbours.
inline int ctc_min_frames(const std::vector<int>& tokens) {
  int n = static_cast<int>(tokens.size());
  for (size_t i = 1; i < tokens.size(); ++i)
    if (tokens[i] == tokens[i - 1]) ++n;
  return n;
}

}  // namespace ftgan

#endif  // FTGAN_SHAPES_H_
