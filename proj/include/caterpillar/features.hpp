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
#include <string_view>
#include <vector>

#include "caterpillar/models.hpp"

namespace caterpillar {

/// How a [H, W, C] feature map collapses to one H x W plane.
struct FeatureReduce {
  bool mean = true;
  Index channel = 0;

  /// "mean" or "channel:<i>".
  static FeatureReduce parse(std::string_view s);
  /// File-name tag: "mean" or "channel<i>".
  std::string tag() const;
};

/// Plane of image `n` of `t`.
template <typename Scalar>
Eigen::MatrixXd reduce_feature_map(const Tensor<Scalar>& t, Index n, const FeatureReduce& reduce);

/// Binary 8-bit PGM: "P5\n<W> <H>\n255\n" then W*H bytes, min-max scaled to
/// [0, 255]. A constant plane maps to all zeros.
std::string encode_pgm(const Eigen::MatrixXd& plane);

/// Writes <out_dir>/stage<k>_<tag>.pgm for every requested stage of the first
/// image of `image`; returns the written paths.
template <typename Scalar>
std::vector<std::string> dump_features(Model<Scalar>& model, const Tensor<Scalar>& image, const std::vector<int>& stages,
                                       const FeatureReduce& reduce, const std::string& out_dir);

}  // namespace caterpillar
