/* Copyright (c) 2026 The Caterpillar Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#pragma once

#include <string>

#include "caterpillar/layer.hpp"

namespace caterpillar {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst;  // "input" or a parameter name
  Index checked = 0;  // number of scalar entries compared
};

/// Compares the analytic backward of `layer` with central differences of the
/// scalar objective <r, layer(x)> for a fixed random r, over every input entry
/// and every trainable parameter entry. Relative error is
/// |a - n| / max(1, |a|, |n|). Throws NumericError on a non-finite gradient.
GradCheckResult finite_diff_check(Layer<double>& layer, const Tensor<double>& input,
                                  double epsilon = 1e-5, Mode mode = Mode::kTrain,
                                  std::uint64_t seed = 0x5eed);

}  // namespace caterpillar
