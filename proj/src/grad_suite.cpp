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


#include <functional>

#include "caterpillar/error.hpp"
#include "caterpillar/grad_suite.hpp"
#include "caterpillar/gradcheck.hpp"
#include "caterpillar/models.hpp"

namespace caterpillar {

namespace {

constexpr double kLinearTolerance = 1e-8;
constexpr double kTolerance = 1e-4;

using D = double;

/// Linear layer whose input gradient is scaled by 1.5.
class CorruptedLinear : public Linear<D> {
 public:
  using Linear<D>::Linear;
  Tensor<D> backward(const Tensor<D>& grad_out) override {
    Tensor<D> dx = Linear<D>::backward(grad_out);
    dx *= 1.5;
    return dx;
  }
};

struct Fixture {
  std::string config;
  std::function<std::unique_ptr<Layer<D>>(Rng&)> make;
  Shape input;
  double tolerance = kTolerance;
  Mode mode = Mode::kTrain;
  bool unit_weights = false;  // redraw weights from U(-1, 1)
};

Index spc_channels(const SpcConfig& cfg) {
  const Index nd = cfg.direction_count();
  if (!uses_reduce(cfg.mixing)) return 8;
  return nd == 4 || nd == 8 ? 8 : nd;
}

std::vector<SpcConfig> spc_grid() {
  std::vector<SpcConfig> out;
  for (int nd : {4, 5, 8, 9})
    for (Index s : {0, 1, 2})
      for (auto pad : {PaddingMode::kZero, PaddingMode::kReplicate, PaddingMode::kCircular, PaddingMode::kReflect})
        for (auto mix : {MixingWay::kReduceConcatFuse, MixingWay::kReduceConcat, MixingWay::kConcatFuse,
                         MixingWay::kSumFuse, MixingWay::kSum}) {
          SpcConfig cfg;
          cfg.directions = SpcConfig::preset(nd);
          cfg.steps = s;
          cfg.padding = pad;
          cfg.mixing = mix;
          out.push_back(cfg);
        }
  return out;
}

Fixture spc_fixture(const SpcConfig& cfg) {
  const Index c = spc_channels(cfg);
  return {cfg.str(), [cfg, c](Rng& rng) { return std::make_unique<Spc<D>>("spc", cfg, c, true, rng); },
          Shape{2, 5, 5, c}};
}

std::vector<Fixture> fixtures_for(const std::string& target, const GradSuiteOptions& o) {
  std::vector<Fixture> f;
  if (target == "linear") {
    f.push_back({"bias=1", [](Rng& r) { return std::make_unique<Linear<D>>("linear", 6, 5, true, r); },
                 Shape{2, 3, 3, 6}, kLinearTolerance});
    f.push_back({"bias=0", [](Rng& r) { return std::make_unique<Linear<D>>("linear", 6, 5, false, r); },
                 Shape{2, 3, 3, 6}, kLinearTolerance});
  } else if (target == "corrupted-linear") {
    f.push_back({"input gradient x1.5",
                 [](Rng& r) { return std::make_unique<CorruptedLinear>("corrupted", 6, 5, true, r); },
                 Shape{1, 3, 3, 6}, kLinearTolerance});
  } else if (target == "batchnorm") {
    f.push_back({"mode=train", [](Rng&) { return std::make_unique<BatchNorm2d<D>>("bn", 4); }, Shape{2, 3, 3, 4}});
    f.push_back({"mode=eval", [](Rng&) { return std::make_unique<BatchNorm2d<D>>("bn", 4); }, Shape{2, 3, 3, 4},
                 kTolerance, Mode::kEval});
  } else if (target == "layernorm") {
    f.push_back({"", [](Rng&) { return std::make_unique<LayerNorm<D>>("ln", 6); }, Shape{2, 3, 3, 6}});
  } else if (target == "gelu") {
    f.push_back({"", [](Rng&) { return std::make_unique<ActivationLayer<D>>("gelu", Activation::kGelu); },
                 Shape{2, 3, 3, 4}});
  } else if (target == "relu") {
    f.push_back({"", [](Rng&) { return std::make_unique<ActivationLayer<D>>("relu", Activation::kRelu); },
                 Shape{2, 3, 3, 4}});
  } else if (target == "ffn") {
    f.push_back({"ratio=3", [](Rng& r) { return std::make_unique<Ffn<D>>("ffn", 4, 3, r); }, Shape{2, 3, 3, 4}});
  } else if (target == "conv") {
    f.push_back({"k=3 s=1 same", [](Rng& r) {
                   return std::make_unique<Conv2d<D>>("conv", 3, 4, 3, 1, ConvPadding::kSame, true, r);
                 }, Shape{2, 5, 5, 3}});
    f.push_back({"k=3 s=2 same", [](Rng& r) {
                   return std::make_unique<Conv2d<D>>("conv", 3, 4, 3, 2, ConvPadding::kSame, false, r);
                 }, Shape{2, 5, 5, 3}});
    f.push_back({"k=2 s=2 valid", [](Rng& r) {
                   return std::make_unique<Conv2d<D>>("conv", 3, 4, 2, 2, ConvPadding::kValid, true, r);
                 }, Shape{2, 4, 4, 3}});
    f.push_back({"k=1 s=2 valid", [](Rng& r) {
                   return std::make_unique<Conv2d<D>>("conv", 3, 4, 1, 2, ConvPadding::kValid, false, r);
                 }, Shape{2, 5, 5, 3}});
  } else if (target == "dwconv") {
    f.push_back({"k=3", [](Rng& r) { return std::make_unique<DwConv2d<D>>("dwconv", 4, 3, true, r); },
                 Shape{2, 5, 5, 4}});
  } else if (target == "pool") {
    f.push_back({"avg 2x2", [](Rng&) { return std::make_unique<AvgPool2d<D>>("avgpool", 2); }, Shape{2, 4, 4, 3}});
    f.push_back({"max 3/2/1", [](Rng&) { return std::make_unique<MaxPool2d<D>>("maxpool", 3, 2, 1); },
                 Shape{2, 5, 5, 3}});
    f.push_back({"global avg", [](Rng&) { return std::make_unique<GlobalAvgPool<D>>("gap"); }, Shape{2, 3, 3, 3}});
  } else if (target == "spc") {
    if (o.spc) {
      o.spc->validate(spc_channels(*o.spc));
      f.push_back(spc_fixture(*o.spc));
    } else {
      for (const auto& cfg : spc_grid()) f.push_back(spc_fixture(cfg));
    }
  } else if (target == "smlp") {
    f.push_back({"bias=1", [](Rng& r) { return std::make_unique<Smlp<D>>("smlp", 4, 5, 3, true, r); },
                 Shape{2, 4, 5, 3}});
    f.push_back({"bias=0", [](Rng& r) { return std::make_unique<Smlp<D>>("smlp", 4, 5, 3, false, r); },
                 Shape{2, 4, 5, 3}});
  } else if (target == "block") {
    for (auto mixer : {LocalMixer::kSpc, LocalMixer::kDwConv, LocalMixer::kIdentity})
      for (int s = 0; s < 6; ++s) {
        BlockConfig cfg;
        cfg.local_mixer = mixer;
        cfg.combine = static_cast<CombineStrategy>(s);
        if (o.spc) cfg.spc = *o.spc;
        const std::string text = "local_mixer=" + std::string(to_string(mixer)) +
                                 " combine=" + std::string(to_string(cfg.combine));
        f.push_back({text, [cfg](Rng& r) { return std::make_unique<MixerBlock<D>>("block", cfg, 4, 4, 8, r); },
                     Shape{2, 4, 4, 8}});
      }
  } else if (target == "basicblock") {
    for (auto mixer : {ResNetMixer::kConv3x3, ResNetMixer::kSpc})
      for (Index stride : {1, 2}) {
        const std::string text = std::string(mixer == ResNetMixer::kSpc ? "mixer=spc" : "mixer=conv3x3") +
                                 " stride=" + std::to_string(stride);
        f.push_back({text, [mixer, stride](Rng& r) {
                       return std::make_unique<BasicBlock<D>>("basic", 4, 8, stride, mixer, SpcConfig{}, r);
                     }, Shape{2, 4, 4, 4}, kTolerance, Mode::kTrain, true});
      }
  } else {
    throw ConfigError("unknown gradcheck target '" + target + "'");
  }
  return f;
}

}  // namespace

std::vector<std::string> grad_targets() {
  return {"linear", "batchnorm", "layernorm", "gelu", "relu",  "ffn",        "conv",
          "dwconv", "pool",      "spc",       "smlp", "block", "basicblock", "corrupted-linear"};
}

std::vector<GradCase> run_grad_suite(const GradSuiteOptions& options) {
  if (options.trials < 1) throw ConfigError("trials must be at least 1");
  std::vector<std::string> targets;
  if (options.target == "all") {
    targets = grad_targets();
    targets.pop_back();
  } else {
    targets.push_back(options.target);
  }
  std::vector<GradCase> out;
  for (const auto& target : targets) {
    for (const auto& fx : fixtures_for(target, options)) {
      for (int t = 0; t < options.trials; ++t) {
        const std::uint64_t seed = options.seed + static_cast<std::uint64_t>(t);
        Rng rng(seed);
        auto layer = fx.make(rng);
        // With std-0.02 weights, batchnorm rescales a weight nudge of epsilon
        // enough that relu inputs cross zero inside the difference stencil.
        if (fx.unit_weights)
          for (auto* p : layer->parameters())
            if (p->kind == ParamKind::kWeight) p->value = random_matrix<D>(p->value.rows(), p->value.cols(), rng);
        const auto x = random_uniform<D>(fx.input, rng);
        GradCase c{target, fx.config, 0, fx.tolerance, "", 0, false};
        if (!c.config.empty()) c.config += " ";
        c.config += "seed=" + std::to_string(seed);
        try {
          const auto r = finite_diff_check(*layer, x, 1e-5, fx.mode, seed ^ 0x9e3779b97f4a7c15ULL);
          c.max_relative_error = r.max_relative_error;
          c.worst = r.worst;
          c.checked = r.checked;
          c.passed = r.max_relative_error < fx.tolerance;
        } catch (const NumericError& e) {
          c.worst = e.what();
        }
        out.push_back(c);
      }
    }
  }
  return out;
}

}  // namespace caterpillar
