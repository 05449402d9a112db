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

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "caterpillar/blocks.hpp"

namespace caterpillar {

enum class Architecture { kCaterpillar, kResNet18 };

/// 3x3 mixer inside ResNet-18 basic blocks.
enum class ResNetMixer { kConv3x3, kSpc };

/// Spatial extent and width of one pyramid stage.
struct StageShape {
  Index h;
  Index w;
  Index c;
};

/// Architecture hyper-parameters. One value describes a whole model and has a
/// line-oriented text form (see docs in README): `[section]` headers followed by
/// `key = value` lines.
struct ModelSpec {
  Architecture arch = Architecture::kCaterpillar;
  std::string variant = "T";  // Mi, Tx, T, S, B or custom
  Index base_width = 80;
  std::array<Index, 4> channels{80, 160, 320, 640};
  std::array<Index, 4> depths{2, 8, 14, 2};
  Index patch_size = 4;
  Index input_h = 224;
  Index input_w = 224;
  Index input_c = 3;
  Index num_classes = 1000;
  // Whether the transition into stage k+2 halves the resolution.
  std::array<bool, 3> downsample{true, true, true};
  BlockConfig block;
  ResNetMixer resnet_mixer = ResNetMixer::kConv3x3;
  bool small_stem = false;  // ResNet: 3x3 stride-1 stem without max-pool

  /// Caterpillar preset (Mi, Tx, T, S, B) at a square input resolution.
  static ModelSpec caterpillar(std::string_view variant, Index resolution = 224);

  /// ResNet-18 with base width n_c; small_stem selects the small-image stem.
  static ModelSpec resnet18(Index n_c, ResNetMixer mixer, Index num_classes, Index resolution,
                            bool small_stem);

  /// Replaces the widths by `channels` (e.g. {72, 144, 288, 576}).
  ModelSpec with_channels(const std::array<Index, 4>& channels) const;

  /// Stage maps after the stem; throws ConfigError naming the offending stage.
  std::vector<StageShape> stages() const;

  void validate() const;

  std::string str() const;
  static ModelSpec parse(std::string_view text);

  bool operator==(const ModelSpec&) const = default;
};

/// Small-image dataset geometry.
struct DatasetProfile {
  std::string name;
  Index h;
  Index w;
  Index c;
  Index num_classes;
  Index patch_size;  // pyramid patch size

  /// MIN (84x84, patch 3), CIFAR (32x32, patch 1), CIFAR100, Fashion (28x28x1, patch 1).
  static DatasetProfile named(std::string_view name);
};

/// Rebinds a Caterpillar spec to a small-image profile: patch size from the
/// profile and a stage transition halves the map only when its extent is even,
/// so odd 7x7 maps are kept (84 -> 28,14,7,7; 32 -> 32,16,8,4; 28 -> 28,14,7,7).
ModelSpec adapt_small_images(const ModelSpec& spec, const DatasetProfile& profile);

/// Image classifier built from a ModelSpec: stem, four stages, head.
template <typename Scalar>
class Model : public Layer<Scalar> {
 public:
  using TensorT = Tensor<Scalar>;
  using ParameterT = Parameter<Scalar>;

  Model(ModelSpec spec, std::uint64_t seed);

  TensorT forward(const TensorT& x, Mode mode) override;
  TensorT backward(const TensorT& grad_out) override;
  Shape describe(const Shape& in, CostTable* table) const override;
  void collect_parameters(std::vector<ParameterT*>& out) override;

  /// Output of stage `stage` (1-based) for input x.
  TensorT stage_output(const TensorT& x, int stage, Mode mode = Mode::kEval);

  const ModelSpec& spec() const { return spec_; }
  Shape input_shape(Index batch) const { return Shape{batch, spec_.input_h, spec_.input_w, spec_.input_c}; }
  Sequential<Scalar>& stem() { return stem_; }
  Sequential<Scalar>& stage(int k) { return *stages_.at(static_cast<std::size_t>(k - 1)); }
  Sequential<Scalar>& head() { return head_; }
  int stage_count() const { return static_cast<int>(stages_.size()); }

 private:
  void build_caterpillar(Rng& rng);
  void build_resnet18(Rng& rng);

  ModelSpec spec_;
  Sequential<Scalar> stem_;
  std::vector<std::unique_ptr<Sequential<Scalar>>> stages_;
  Sequential<Scalar> head_;
};

template <typename Scalar>
std::unique_ptr<Model<Scalar>> build_caterpillar(const ModelSpec& spec, std::uint64_t seed = 0);

template <typename Scalar>
std::unique_ptr<Model<Scalar>> build_resnet18(Index n_c, ResNetMixer mixer, Index num_classes,
                                              Index resolution, bool small_stem, std::uint64_t seed = 0);

/// Basic residual block of ResNet-18 with either 3x3 convolutions or SPC.
template <typename Scalar>
class BasicBlock : public Layer<Scalar> {
 public:
  using TensorT = Tensor<Scalar>;
  using ParameterT = Parameter<Scalar>;

  BasicBlock(std::string name, Index in_channels, Index out_channels, Index stride, ResNetMixer mixer,
             const SpcConfig& spc, Rng& rng);

  TensorT forward(const TensorT& x, Mode mode) override;
  TensorT backward(const TensorT& grad_out) override;
  Shape describe(const Shape& in, CostTable* table) const override;
  void collect_parameters(std::vector<ParameterT*>& out) override;

 private:
  Sequential<Scalar> main_;
  std::optional<Sequential<Scalar>> shortcut_;
  ActivationLayer<Scalar> out_act_;
};

enum class MixerKind { kConv, kDwConv, kSpc };

/// Biasless closed forms: conv d_in k^2 d_out, dwconv d_in k^2, spc d_in^2 + d_in d_out.
std::int64_t local_mixer_param_count(Index d_in, Index d_out, MixerKind kind, Index kernel = 3);

struct CostReport {
  CostTable rows;
  std::int64_t params = 0;        // enumerated Parameter elements (buffers excluded)
  std::int64_t table_params = 0;  // sum of per-layer closed forms
  std::int64_t macs = 0;          // multiply-accumulates for the given batch
  Shape output;
};

template <typename Scalar>
std::int64_t count_params(Layer<Scalar>& layer);

/// Per-layer parameters and MACs for an input of `input` shape. 1 MAC per
/// weight application; reported "G" figures are macs / 1e9.
template <typename Scalar>
CostReport estimate_cost(Layer<Scalar>& layer, const Shape& input);

}  // namespace caterpillar
