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

#include "caterpillar/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include "caterpillar/error.hpp"

namespace caterpillar {

namespace {

double objective(Layer<double>& layer, const Tensor<double>& x, const Tensor<double>& probe, Mode mode) {
  const Tensor<double> y = layer.forward(x, mode);
  return y.pillars().cwiseProduct(probe.pillars()).sum();
}

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

}  // namespace

GradCheckResult finite_diff_check(Layer<double>& layer, const Tensor<double>& input, double epsilon,
                                  Mode mode, std::uint64_t seed) {
  Rng rng(seed);
  const Shape out_shape = layer.describe(input.shape(), nullptr);
  const Tensor<double> probe = random_uniform<double>(out_shape, rng);

  auto params = layer.parameters();
  layer.zero_grad();
  layer.forward(input, mode);
  const Tensor<double> dx = layer.backward(probe);
  if (!dx.all_finite()) throw NumericError(layer.name() + ": non-finite input gradient");
  std::vector<Matrix<double>> analytic;
  for (auto* p : params) {
    if (!p->grad.allFinite()) throw NumericError(p->name + ": non-finite gradient");
    analytic.push_back(p->grad);
  }

  GradCheckResult result;
  auto record = [&](double a, double n, const std::string& where) {
    const double e = relative_error(a, n);
    ++result.checked;
    if (e > result.max_relative_error || result.worst.empty()) {
      result.max_relative_error = e;
      result.worst = where;
    }
  };

  Tensor<double> x = input;
  for (Index k = 0; k < x.shape().size(); ++k) {
    const double saved = x.data()[k];
    x.data()[k] = saved + epsilon;
    const double plus = objective(layer, x, probe, mode);
    x.data()[k] = saved - epsilon;
    const double minus = objective(layer, x, probe, mode);
    x.data()[k] = saved;
    record(dx.data()[k], (plus - minus) / (2.0 * epsilon), "input");
  }

  for (std::size_t q = 0; q < params.size(); ++q) {
    auto* p = params[q];
    if (!p->trainable()) continue;
    for (Index k = 0; k < p->value.size(); ++k) {
      const double saved = p->value.data()[k];
      p->value.data()[k] = saved + epsilon;
      const double plus = objective(layer, input, probe, mode);
      p->value.data()[k] = saved - epsilon;
      const double minus = objective(layer, input, probe, mode);
      p->value.data()[k] = saved;
      record(analytic[q].data()[k], (plus - minus) / (2.0 * epsilon), p->name);
    }
  }
  return result;
}

}  // namespace caterpillar
