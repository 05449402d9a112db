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
#include <string>
#include <string_view>
#include <vector>

#include "caterpillar/tensor.hpp"

namespace caterpillar {

/// Images in [0,1] (unless normalized) with integer labels in [0, class_count).
struct LabeledImages {
  Tensor<float> images{Shape{1, 1, 1, 1}};
  std::vector<int> labels;
  int class_count = 0;

  Index size() const { return static_cast<Index>(labels.size()); }
  Shape image_shape() const { return Shape{1, images.h(), images.w(), images.c()}; }

  /// Throws FormatError unless N >= 1, labels match N and lie in [0, K).
  void validate() const;

  /// Rows `indices` in the given order.
  LabeledImages subset(const std::vector<Index>& indices) const;

  bool operator==(const LabeledImages& other) const;
};

/// CIFAR-10 binary: 3073-byte records, 1 label byte then 1024 R, 1024 G, 1024 B bytes.
LabeledImages parse_cifar10_binary(std::string_view bytes);
LabeledImages load_cifar10_binary(const std::vector<std::string>& files);
std::string write_cifar10_binary(const LabeledImages& data);

/// IDX pair: unsigned-byte rank-3 images (magic 0x00000803) and labels (0x00000801), big-endian dims.
LabeledImages parse_idx(std::string_view image_bytes, std::string_view label_bytes, int class_count = 10);
LabeledImages load_idx(const std::string& image_file, const std::string& label_file, int class_count = 10);
/// Returns {image bytes, label bytes}; requires single-channel images.
std::pair<std::string, std::string> write_idx(const LabeledImages& data);

/// Raw blob: "RAW1", u32 N,H,W,C, f32 pixels, u32 K, N u32 labels (all little-endian).
LabeledImages parse_raw_blob(std::string_view bytes);
LabeledImages load_raw_blob(const std::string& file);
std::string write_raw_blob(const LabeledImages& data);

/// Class k images are a seeded per-class template plus N(0, sigma^2) noise,
/// clipped to [0,1]; sample i has label i % K. Templates are drawn first.
LabeledImages synth_blobs(std::uint64_t seed, Index n, Index h, Index w, Index c, int k, double sigma = 0.1);

/// Per-channel (x - mean) / std, applied in place.
void normalize(LabeledImages& data, const std::vector<float>& mean, const std::vector<float>& stddev);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

}  // namespace caterpillar
