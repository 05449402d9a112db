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


#include <set>

#include "caterpillar/error.hpp"
#include "caterpillar/models.hpp"

namespace caterpillar {

namespace {

std::string stage_name(int k) { return "stage" + std::to_string(k); }

}  // namespace

template <typename Scalar>
BasicBlock<Scalar>::BasicBlock(std::string name, Index in_channels, Index out_channels, Index stride,
                               ResNetMixer mixer, const SpcConfig& spc, Rng& rng)
    : Layer<Scalar>(std::move(name)),
      main_(scoped(this->name_, "main")),
      out_act_(scoped(this->name_, "relu_out"), Activation::kRelu) {
  if (stride != 1 && stride != 2) throw ConfigError(this->name_ + ": stride must be 1 or 2");
  const std::string& n = this->name_;
  if (mixer == ResNetMixer::kConv3x3) {
    main_.template emplace<Conv2d<Scalar>>(scoped(n, "conv1"), in_channels, out_channels, 3, stride,
                                           ConvPadding::kSame, false, rng);
  } else {
    main_.template emplace<Spc<Scalar>>(scoped(n, "spc1"), spc, in_channels, out_channels, false, rng);
    if (stride == 2) main_.template emplace<AvgPool2d<Scalar>>(scoped(n, "pool"), 2);
  }
  main_.template emplace<BatchNorm2d<Scalar>>(scoped(n, "bn1"), out_channels);
  main_.template emplace<ActivationLayer<Scalar>>(scoped(n, "relu1"), Activation::kRelu);
  if (mixer == ResNetMixer::kConv3x3) {
    main_.template emplace<Conv2d<Scalar>>(scoped(n, "conv2"), out_channels, out_channels, 3, 1, ConvPadding::kSame,
                                           false, rng);
  } else {
    main_.template emplace<Spc<Scalar>>(scoped(n, "spc2"), spc, out_channels, out_channels, false, rng);
  }
  main_.template emplace<BatchNorm2d<Scalar>>(scoped(n, "bn2"), out_channels);
  if (stride != 1 || in_channels != out_channels) {
    shortcut_.emplace(scoped(n, "shortcut"));
    shortcut_->template emplace<Conv2d<Scalar>>(scoped(n, "shortcut.conv"), in_channels, out_channels, 1, stride,
                                                ConvPadding::kValid, false, rng);
    shortcut_->template emplace<BatchNorm2d<Scalar>>(scoped(n, "shortcut.bn"), out_channels);
  }
}

template <typename Scalar>
Tensor<Scalar> BasicBlock<Scalar>::forward(const Tensor<Scalar>& x, Mode mode) {
  TensorT y = main_.forward(x, mode);
  if (shortcut_) {
    y += shortcut_->forward(x, mode);
  } else {
    y += x;
  }
  return out_act_.forward(y, mode);
}

template <typename Scalar>
Tensor<Scalar> BasicBlock<Scalar>::backward(const Tensor<Scalar>& grad_out) {
  const TensorT g = out_act_.backward(grad_out);
  TensorT dx = main_.backward(g);
  if (shortcut_) {
    dx += shortcut_->backward(g);
  } else {
    dx += g;
  }
  return dx;
}

template <typename Scalar>
Shape BasicBlock<Scalar>::describe(const Shape& in, CostTable* table) const {
  const Shape out = main_.describe(in, table);
  const Shape skip = shortcut_ ? shortcut_->describe(in, table) : in;
  if (!(out == skip)) {
    throw DimensionError(this->name_ + ": residual branch " + out.str() + " does not match shortcut " + skip.str());
  }
  return out;
}

template <typename Scalar>
void BasicBlock<Scalar>::collect_parameters(std::vector<ParameterT*>& out) {
  main_.collect_parameters(out);
  if (shortcut_) shortcut_->collect_parameters(out);
}

template <typename Scalar>
Model<Scalar>::Model(ModelSpec spec, std::uint64_t seed)
    : Layer<Scalar>("model"), spec_(std::move(spec)), stem_("stem"), head_("head") {
  spec_.validate();
  Rng rng(seed);
  if (spec_.arch == Architecture::kCaterpillar) {
    build_caterpillar(rng);
  } else {
    build_resnet18(rng);
  }
  std::set<std::string> seen;
  for (auto* p : this->parameters()) {
    if (!seen.insert(p->name).second) throw ConfigError("duplicate parameter name '" + p->name + "'");
  }
}

template <typename Scalar>
void Model<Scalar>::build_caterpillar(Rng& rng) {
  const auto maps = spec_.stages();
  stem_.template emplace<Conv2d<Scalar>>("patch_embed", spec_.input_c, maps[0].c, spec_.patch_size,
                                         spec_.patch_size, ConvPadding::kValid, true, rng);
  for (int k = 1; k <= 4; ++k) {
    const auto& m = maps[static_cast<std::size_t>(k - 1)];
    auto stage = std::make_unique<Sequential<Scalar>>(stage_name(k));
    if (k > 1) {
      const Index prev = maps[static_cast<std::size_t>(k - 2)].c;
      const std::string name = scoped(stage_name(k), "downsample");
      if (spec_.downsample[static_cast<std::size_t>(k - 2)]) {
        stage->template emplace<Conv2d<Scalar>>(name, prev, m.c, 2, 2, ConvPadding::kValid, true, rng);
      } else {
        stage->template emplace<Conv2d<Scalar>>(name, prev, m.c, 1, 1, ConvPadding::kValid, true, rng);
      }
    }
    for (Index b = 1; b <= spec_.depths[static_cast<std::size_t>(k - 1)]; ++b) {
      stage->template emplace<MixerBlock<Scalar>>(scoped(stage_name(k), "block" + std::to_string(b)), spec_.block,
                                                  m.h, m.w, m.c, rng);
    }
    stages_.push_back(std::move(stage));
  }
  const Index last = maps.back().c;
  head_.template emplace<GlobalAvgPool<Scalar>>("head.pool");
  head_.template emplace<LayerNorm<Scalar>>("head.norm", last);
  head_.template emplace<Linear<Scalar>>("head.fc", last, spec_.num_classes, true, rng);
}

template <typename Scalar>
void Model<Scalar>::build_resnet18(Rng& rng) {
  const Index width = spec_.channels[0];
  if (spec_.small_stem) {
    stem_.template emplace<Conv2d<Scalar>>("stem.conv", spec_.input_c, width, 3, 1, ConvPadding::kSame, false, rng);
  } else {
    stem_.template emplace<Conv2d<Scalar>>("stem.conv", spec_.input_c, width, 7, 2, ConvPadding::kSame, false, rng);
  }
  stem_.template emplace<BatchNorm2d<Scalar>>("stem.bn", width);
  stem_.template emplace<ActivationLayer<Scalar>>("stem.relu", Activation::kRelu);
  if (!spec_.small_stem) stem_.template emplace<MaxPool2d<Scalar>>("stem.pool", 3, 2, 1);
  Index in = width;
  for (int k = 1; k <= 4; ++k) {
    const Index out = spec_.channels[static_cast<std::size_t>(k - 1)];
    auto stage = std::make_unique<Sequential<Scalar>>(stage_name(k));
    for (Index b = 1; b <= spec_.depths[static_cast<std::size_t>(k - 1)]; ++b) {
      const bool halve = b == 1 && k > 1 && spec_.downsample[static_cast<std::size_t>(k - 2)];
      stage->template emplace<BasicBlock<Scalar>>(scoped(stage_name(k), "block" + std::to_string(b)), in, out,
                                                  halve ? 2 : 1, spec_.resnet_mixer, spec_.block.spc, rng);
      in = out;
    }
    stages_.push_back(std::move(stage));
  }
  head_.template emplace<GlobalAvgPool<Scalar>>("head.pool");
  head_.template emplace<Linear<Scalar>>("head.fc", in, spec_.num_classes, true, rng);
}

template <typename Scalar>
Tensor<Scalar> Model<Scalar>::forward(const Tensor<Scalar>& x, Mode mode) {
  if (x.h() != spec_.input_h || x.w() != spec_.input_w || x.c() != spec_.input_c) {
    throw DimensionError("model expects input " + input_shape(x.n()).str() + ", got " + x.shape().str());
  }
  TensorT y = stem_.forward(x, mode);
  for (auto& s : stages_) y = s->forward(y, mode);
  return head_.forward(y, mode);
}

template <typename Scalar>
Tensor<Scalar> Model<Scalar>::backward(const Tensor<Scalar>& grad_out) {
  TensorT g = head_.backward(grad_out);
  for (auto it = stages_.rbegin(); it != stages_.rend(); ++it) g = (*it)->backward(g);
  return stem_.backward(g);
}

template <typename Scalar>
Shape Model<Scalar>::describe(const Shape& in, CostTable* table) const {
  Shape s = stem_.describe(in, table);
  for (const auto& stage : stages_) s = stage->describe(s, table);
  return head_.describe(s, table);
}

template <typename Scalar>
void Model<Scalar>::collect_parameters(std::vector<ParameterT*>& out) {
  stem_.collect_parameters(out);
  for (auto& s : stages_) s->collect_parameters(out);
  head_.collect_parameters(out);
}

template <typename Scalar>
Tensor<Scalar> Model<Scalar>::stage_output(const Tensor<Scalar>& x, int stage, Mode mode) {
  if (stage < 1 || stage > stage_count()) {
    throw IndexError("stage " + std::to_string(stage) + " out of range 1.." + std::to_string(stage_count()));
  }
  TensorT y = stem_.forward(x, mode);
  for (int k = 0; k < stage; ++k) y = stages_[static_cast<std::size_t>(k)]->forward(y, mode);
  return y;
}

template <typename Scalar>
std::unique_ptr<Model<Scalar>> build_caterpillar(const ModelSpec& spec, std::uint64_t seed) {
  if (spec.arch != Architecture::kCaterpillar) throw ConfigError("build_caterpillar: spec is not a Caterpillar spec");
  return std::make_unique<Model<Scalar>>(spec, seed);
}

template <typename Scalar>
std::unique_ptr<Model<Scalar>> build_resnet18(Index n_c, ResNetMixer mixer, Index num_classes, Index resolution,
                                              bool small_stem, std::uint64_t seed) {
  return std::make_unique<Model<Scalar>>(ModelSpec::resnet18(n_c, mixer, num_classes, resolution, small_stem), seed);
}

std::int64_t local_mixer_param_count(Index d_in, Index d_out, MixerKind kind, Index kernel) {
  switch (kind) {
    case MixerKind::kConv:
      return static_cast<std::int64_t>(d_in) * kernel * kernel * d_out;
    case MixerKind::kDwConv:
      return static_cast<std::int64_t>(d_in) * kernel * kernel;
    case MixerKind::kSpc:
      return static_cast<std::int64_t>(d_in) * d_in + static_cast<std::int64_t>(d_in) * d_out;
  }
  return 0;
}

template <typename Scalar>
std::int64_t count_params(Layer<Scalar>& layer) {
  std::int64_t total = 0;
  for (auto* p : layer.parameters())
    if (p->trainable()) total += p->size();
  return total;
}

template <typename Scalar>
CostReport estimate_cost(Layer<Scalar>& layer, const Shape& input) {
  CostReport report;
  report.output = layer.describe(input, &report.rows);
  report.params = count_params(layer);
  for (const auto& row : report.rows) {
    report.table_params += row.params;
    report.macs += row.macs;
  }
  return report;
}

#define CATERPILLAR_INSTANTIATE(S)                                                                            \
  template class BasicBlock<S>;                                                                               \
  template class Model<S>;                                                                                    \
  template std::unique_ptr<Model<S>> build_caterpillar<S>(const ModelSpec&, std::uint64_t);                   \
  template std::unique_ptr<Model<S>> build_resnet18<S>(Index, ResNetMixer, Index, Index, bool, std::uint64_t); \
  template std::int64_t count_params<S>(Layer<S>&);                                                           \
  template CostReport estimate_cost<S>(Layer<S>&, const Shape&);

CATERPILLAR_INSTANTIATE(float)
CATERPILLAR_INSTANTIATE(double)

}  // namespace caterpillar
