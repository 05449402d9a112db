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
#include <random>

#include "caterpillar/tensor.hpp"

namespace caterpillar {

/// Seeded generator on top of std::mt19937_64, whose output sequence is fixed by
/// the C++ standard. Every derived draw (uniform, normal, index) is computed
/// here rather than through <random> distributions, which are allowed to differ
/// between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 5489u) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller.
  double normal();

  /// Normal(0, stddev) resampled until |z| <= clip * stddev.
  double truncated_normal(double stddev, double clip = 2.0);

  /// Uniform integer in [0, bound) by rejection.
  std::uint64_t uniform_index(std::uint64_t bound);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

template <typename Scalar>
Tensor<Scalar> random_normal(const Shape& shape, Rng& rng, double stddev = 1.0) {
  Tensor<Scalar> t(shape);
  Scalar* p = t.data();
  for (Index k = 0; k < shape.size(); ++k) p[k] = static_cast<Scalar>(stddev * rng.normal());
  return t;
}

template <typename Scalar>
Tensor<Scalar> random_uniform(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<Scalar> t(shape);
  Scalar* p = t.data();
  for (Index k = 0; k < shape.size(); ++k) p[k] = static_cast<Scalar>(rng.uniform(lo, hi));
  return t;
}

template <typename Scalar>
Matrix<Scalar> random_matrix(Index rows, Index cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Matrix<Scalar> m(rows, cols);
  for (Index k = 0; k < m.size(); ++k) m.data()[k] = static_cast<Scalar>(rng.uniform(lo, hi));
  return m;
}

}  // namespace caterpillar
