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

#include "caterpillar/spc.hpp"

namespace caterpillar {

enum class BenchOp { kSpc, kConv3x3, kDwConv3x3 };

std::string_view to_string(BenchOp op);
BenchOp parse_bench_op(std::string_view s);

struct BenchOptions {
  std::vector<BenchOp> ops{BenchOp::kSpc, BenchOp::kConv3x3, BenchOp::kDwConv3x3};
  Index channels = 64;
  Index hw = 56;
  Index batch = 8;
  Index reps = 10;
  Index warmup = 2;
  bool backward = false;  // time forward+backward instead of forward only
  bool f64 = false;
  SpcConfig spc;
  std::uint64_t seed = 0;
};

struct BenchRow {
  std::string op;
  std::string config;
  Shape input;
  std::string direction;  // "fwd" or "fwd+bwd"
  Index reps;
  double wall_time_s;
  double images_per_s;  // batch * reps / wall_time_s
  std::int64_t analytic_macs;  // forward MACs for one call on the whole batch
};

struct BenchReport {
  std::string dtype;
  int threads = 1;
  std::string timestamp;  // UTC, ISO 8601
  std::vector<BenchRow> rows;

  /// Two '#' environment lines, then a header row and one row per measurement.
  std::string csv() const;
};

/// Closed-form forward MACs of a bias-free op on [batch, hw, hw, channels]
/// with equal input and output width.
std::int64_t analytic_macs(BenchOp op, Index channels, Index h, Index w, Index batch, const SpcConfig& spc);

/// Forward MACs per output map position ratio of a 3x3 conv to SPC (reduce_concat_fuse): 9d^2 / 2d^2.
double conv_to_spc_mac_ratio(Index channels);

/// MACs of the benchmarked layer as reported by estimate_cost (independent of analytic_macs).
std::int64_t estimated_macs(BenchOp op, const BenchOptions& options);

/// Times every requested op; warmup iterations are run first and not timed.
BenchReport run_bench(const BenchOptions& options);

}  // namespace caterpillar
