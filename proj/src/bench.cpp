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


#include <chrono>
#include <cstdio>
#include <ctime>

#include "caterpillar/bench.hpp"
#include "caterpillar/error.hpp"
#include "caterpillar/layers.hpp"
#include "caterpillar/models.hpp"

namespace caterpillar {

namespace {

constexpr std::string_view kOpNames[] = {"spc", "conv3x3", "dwconv3x3"};

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

template <typename Scalar>
LayerPtr<Scalar> make_op(BenchOp op, const BenchOptions& o, Rng& rng) {
  switch (op) {
    case BenchOp::kSpc:
      return std::make_unique<Spc<Scalar>>("bench.spc", o.spc, o.channels, false, rng);
    case BenchOp::kConv3x3:
      return std::make_unique<Conv2d<Scalar>>("bench.conv3x3", o.channels, o.channels, 3, 1, ConvPadding::kSame,
                                              false, rng);
    case BenchOp::kDwConv3x3:
      return std::make_unique<DwConv2d<Scalar>>("bench.dwconv3x3", o.channels, 3, false, rng);
  }
  throw ConfigError("unreachable bench op");
}

std::string op_config(BenchOp op, const BenchOptions& o) {
  if (op == BenchOp::kSpc) return o.spc.str() + " bias=0";
  if (op == BenchOp::kConv3x3) return "kernel=3 stride=1 padding=same bias=0";
  return "kernel=3 padding=same bias=0";
}

template <typename Scalar>
void bench_ops(const BenchOptions& o, BenchReport& report) {
  Rng rng(o.seed);
  const Shape shape{o.batch, o.hw, o.hw, o.channels};
  for (BenchOp op : o.ops) {
    auto layer = make_op<Scalar>(op, o, rng);
    const auto x = random_uniform<Scalar>(shape, rng);
    const auto probe = random_uniform<Scalar>(layer->describe(shape, nullptr), rng);
    auto run_once = [&] {
      const auto y = layer->forward(x, Mode::kTrain);
      if (o.backward) layer->backward(probe);
      return y.pillars()(0, 0);
    };
    volatile Scalar sink = 0;
    for (Index k = 0; k < o.warmup; ++k) sink = run_once();
    const auto start = std::chrono::steady_clock::now();
    for (Index k = 0; k < o.reps; ++k) sink = run_once();
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    (void)sink;
    report.rows.push_back({std::string(to_string(op)), op_config(op, o), shape, o.backward ? "fwd+bwd" : "fwd", o.reps,
                           wall, static_cast<double>(o.batch * o.reps) / wall,
                           analytic_macs(op, o.channels, o.hw, o.hw, o.batch, o.spc)});
  }
}

}  // namespace

std::string_view to_string(BenchOp op) { return kOpNames[static_cast<int>(op)]; }

BenchOp parse_bench_op(std::string_view s) {
  for (int k = 0; k < 3; ++k)
    if (kOpNames[k] == s) return static_cast<BenchOp>(k);
  throw ConfigError("unknown bench op '" + std::string(s) + "' (spc, conv3x3, dwconv3x3)");
}

std::int64_t analytic_macs(BenchOp op, Index channels, Index h, Index w, Index batch, const SpcConfig& spc) {
  const std::int64_t positions = static_cast<std::int64_t>(batch) * h * w;
  const std::int64_t c = channels;
  switch (op) {
    case BenchOp::kConv3x3:
      return positions * 9 * c * c;
    case BenchOp::kDwConv3x3:
      return positions * 9 * c;
    case BenchOp::kSpc: {
      const std::int64_t nd = spc.direction_count();
      std::int64_t per = 0;
      if (uses_reduce(spc.mixing)) per += c * c;  // nd projections of C -> C/nd
      switch (spc.mixing) {
        case MixingWay::kReduceConcatFuse:
        case MixingWay::kSumFuse:
          per += c * c;
          break;
        case MixingWay::kConcatFuse:
          per += nd * c * c;
          break;
        default:
          break;
      }
      return positions * per;
    }
  }
  return 0;
}

std::int64_t estimated_macs(BenchOp op, const BenchOptions& options) {
  Rng rng(options.seed);
  auto layer = make_op<float>(op, options, rng);
  return estimate_cost(*layer, Shape{options.batch, options.hw, options.hw, options.channels}).macs;
}

double conv_to_spc_mac_ratio(Index channels) {
  const SpcConfig spc;
  return static_cast<double>(analytic_macs(BenchOp::kConv3x3, channels, 1, 1, 1, spc)) /
         static_cast<double>(analytic_macs(BenchOp::kSpc, channels, 1, 1, 1, spc));
}

std::string BenchReport::csv() const {
  std::string out = "# caterpillar-bench v1\n";
  out += "# dtype=" + dtype + " threads=" + std::to_string(threads) + " timestamp=" + timestamp +
         " macs=multiply-accumulates\n";
  out += "operator,config,input_shape,direction,reps,wall_time_s,images_per_s,analytic_macs\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,\"%s\",\"%s\",%s,%lld,%.9g,%.9g,%lld\n", r.op.c_str(), r.config.c_str(),
                  r.input.str().c_str(), r.direction.c_str(), static_cast<long long>(r.reps), r.wall_time_s,
                  r.images_per_s, static_cast<long long>(r.analytic_macs));
    out += buf;
  }
  return out;
}

BenchReport run_bench(const BenchOptions& options) {
  if (options.reps < 1) throw ConfigError("reps must be at least 1");
  if (options.warmup < 0) throw ConfigError("warmup must be non-negative");
  if (options.channels < 1 || options.hw < 1 || options.batch < 1) throw ConfigError("bench shape must be positive");
  options.spc.validate(options.channels);
  BenchReport report;
  report.dtype = options.f64 ? "f64" : "f32";
  report.threads = Eigen::nbThreads();
  report.timestamp = utc_timestamp();
  if (options.f64) {
    bench_ops<double>(options, report);
  } else {
    bench_ops<float>(options, report);
  }
  return report;
}

}  // namespace caterpillar
