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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "caterpillar/spc.hpp"

namespace caterpillar {

struct GradCase {
  std::string target;
  std::string config;
  double max_relative_error = 0;
  double tolerance = 0;
  std::string worst;
  Index checked = 0;
  bool passed = false;
};

struct GradSuiteOptions {
  std::string target = "all";
  int trials = 1;
  std::uint64_t seed = 1;
  std::optional<SpcConfig> spc;  // restricts the spc target to one configuration
};

/// Target names accepted by run_grad_suite besides "all". "corrupted-linear"
/// is a deliberately wrong backward used as a negative control and is not
/// part of "all".
std::vector<std::string> grad_targets();

/// Central-difference checks (f64, epsilon 1e-5). Linear layers must agree to
/// 1e-8 and everything else to 1e-4 in max relative error. Throws ConfigError
/// on an unknown target.
std::vector<GradCase> run_grad_suite(const GradSuiteOptions& options);

}  // namespace caterpillar
