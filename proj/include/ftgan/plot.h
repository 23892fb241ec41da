// ftgan/plot.h
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
// Minimal line charts rendered as standalone SVG.

#ifndef FTGAN_PLOT_H_
#define FTGAN_PLOT_H_

#include <string>
#include <vector>

namespace ftgan {

struct Curve {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Overlays the curves on shared axes with a legend. Output is a pure
// function of the inputs. Throws std::invalid_argument when there is
// nothing to draw or a curve has mismatched x/y lengths.
std::string render_svg(const std::string& title, const std::string& y_label,
                       const std::vector<Curve>& curves);

}  // namespace ftgan

#endif  // FTGAN_PLOT_H_
