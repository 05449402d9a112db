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


#include <cmath>
#include <filesystem>

#include "caterpillar/data.hpp"
#include "caterpillar/error.hpp"
#include "caterpillar/features.hpp"

namespace caterpillar {

FeatureReduce FeatureReduce::parse(std::string_view s) {
  if (s == "mean") return {};
  constexpr std::string_view prefix = "channel:";
  if (s.substr(0, prefix.size()) == prefix) {
    const std::string digits(s.substr(prefix.size()));
    std::size_t used = 0;
    long long v = -1;
    try {
      v = std::stoll(digits, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == digits.size() && v >= 0) return {false, static_cast<Index>(v)};
  }
  throw ConfigError("bad reduce mode '" + std::string(s) + "' (mean or channel:<i>)");
}

std::string FeatureReduce::tag() const { return mean ? "mean" : "channel" + std::to_string(channel); }

template <typename Scalar>
Eigen::MatrixXd reduce_feature_map(const Tensor<Scalar>& t, Index n, const FeatureReduce& reduce) {
  if (n < 0 || n >= t.n()) throw IndexError("image " + std::to_string(n) + " out of range");
  if (!reduce.mean && reduce.channel >= t.c())
    throw IndexError("channel " + std::to_string(reduce.channel) + " out of range for C=" + std::to_string(t.c()));
  Eigen::MatrixXd plane(t.h(), t.w());
  for (Index i = 0; i < t.h(); ++i)
    for (Index j = 0; j < t.w(); ++j) {
      const auto row = t.pillars().row(t.row(n, i, j)).template cast<double>();
      plane(i, j) = reduce.mean ? row.mean() : row(reduce.channel);
    }
  return plane;
}

std::string encode_pgm(const Eigen::MatrixXd& plane) {
  std::string out = "P5\n" + std::to_string(plane.cols()) + " " + std::to_string(plane.rows()) + "\n255\n";
  const double lo = plane.minCoeff();
  const double range = plane.maxCoeff() - lo;
  for (Index i = 0; i < plane.rows(); ++i)
    for (Index j = 0; j < plane.cols(); ++j) {
      const double v = range > 0 ? (plane(i, j) - lo) / range : 0.0;
      out += static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v)));
    }
  return out;
}

template <typename Scalar>
std::vector<std::string> dump_features(Model<Scalar>& model, const Tensor<Scalar>& image, const std::vector<int>& stages,
                                       const FeatureReduce& reduce, const std::string& out_dir) {
  if (stages.empty()) throw ConfigError("no stages requested");
  for (int k : stages)
    if (k < 1 || k > model.stage_count())
      throw IndexError("stage " + std::to_string(k) + " out of range 1.." + std::to_string(model.stage_count()));
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> paths;
  for (int k : stages) {
    const auto features = model.stage_output(image, k, Mode::kEval);
    const std::string path = (std::filesystem::path(out_dir) / ("stage" + std::to_string(k) + "_" + reduce.tag() + ".pgm")).string();
    write_file(path, encode_pgm(reduce_feature_map(features, 0, reduce)));
    paths.push_back(path);
  }
  return paths;
}

#define CATERPILLAR_INSTANTIATE(S)                                                                             \
  template Eigen::MatrixXd reduce_feature_map<S>(const Tensor<S>&, Index, const FeatureReduce&);              \
  template std::vector<std::string> dump_features<S>(Model<S>&, const Tensor<S>&, const std::vector<int>&,     \
                                                     const FeatureReduce&, const std::string&);

CATERPILLAR_INSTANTIATE(float)
CATERPILLAR_INSTANTIATE(double)

}  // namespace caterpillar
