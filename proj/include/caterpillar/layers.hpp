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

#include <optional>
#include <vector>

#include "caterpillar/layer.hpp"

namespace caterpillar {

inline constexpr double kNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

/// Exact GELU, 0.5 x (1 + erf(x / sqrt 2)).
template <typename Scalar>
Tensor<Scalar> gelu(const Tensor<Scalar>& x);

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& x);

/// Per-pillar fully connected layer: project_channels with learnable weight
/// (Cin x Cout) and optional bias.
template <typename Scalar>
class Linear : public Layer<Scalar> {
 public:
  using TensorT = Tensor<Scalar>;
  using ParameterT = Parameter<Scalar>;

  Linear(std::string name, Index in_channels, Index out_channels, bool bias, Rng& rng);

  TensorT forward(const TensorT& x, Mode mode) override;
  TensorT backward(const TensorT& grad_out) override;
  Shape describe(const Shape& in, CostTable* table) const override;
  void collect_parameters(std::vector<ParameterT*>& out) override;

  Index in_channels() const { return in_; }
  Index out_channels() const { return out_; }
  bool has_bias() const { return bias_.has_value(); }
  ParameterT& weight() { return weight_; }
  ParameterT& bias() { return *bias_; }

 private:
  Index in_;
  Index out_;
  ParameterT weight_;
  std::optional<ParameterT> bias_;
  TensorT input_;
};

/// Batch normalization over (N,H,W) per channel.
template <typename Scalar>
class BatchNorm2d : public Layer<Scalar> {
 public:
  using TensorT = Tensor<Scalar>;
  using ParameterT = Parameter<Scalar>;

  BatchNorm2d(std::string name, Index channels);

  TensorT forward(const TensorT& x, Mode mode) override;
  TensorT backward(const TensorT& grad_out) override;
  Shape describe(const Shape& in, CostTable* table) const override;
  void collect_parameters(std::vector<ParameterT*>& out) override;

  ParameterT& gamma() { return gamma_; }
  ParameterT& beta() { return beta_; }
  ParameterT& running_mean() { return running_mean_; }
  ParameterT& running_var() { return running_var_; }

 private:
  Index channels_;
  ParameterT gamma_;
  ParameterT beta_;
  ParameterT running_mean_;
  ParameterT running_var_;
  Mode mode_ = Mode::kTrain;
  Matrix<Scalar> normalized_;
  RowVector<Scalar> inv_std_;
  Shape shape_;
};

/// Layer normalization of each pillar over its channels.
template <typename Scalar>
class LayerNorm : public Layer<Scalar> {
 public:
  using TensorT = Tensor<Scalar>;
  using ParameterT = Parameter<Scalar>;

  LayerNorm(std::string name, Index channels);

  TensorT forward(const TensorT& x, Mode mode) override;
  TensorT backward(const TensorT& grad_out) override;
  Shape describe(const Shape& in, CostTable* table) const override;
  void collect_parameters(std::vector<ParameterT*>& out) override;

  ParameterT& gamma() { return gamma_; }
  ParameterT& beta() { return beta_; }

 private:
  Index channels_;
  ParameterT gamma_;
  ParameterT beta_;
  Matrix<Scalar> normalized_;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std_;
  Shape shape_;
};

enum class Activation { kGelu, kRelu };

template <typename Scalar>
class ActivationLayer : public Layer<Scalar> {
 public:
  using TensorT = Tensor<Scalar>;

  ActivationLayer(std::string name, Activation kind) : Layer<Scalar>(std::move(name)), kind_(kind) {}

  TensorT forward(const TensorT& x, Mode mode) override;
  TensorT backward(const TensorT& grad_out) override;
  Shape describe(const Shape& in, CostTable* table) const override;

 private:
  Activation kind_;
  TensorT input_;
};

/// Channel-mixing MLP: Linear(C, rC) -> GELU -> Linear(rC, C).
template <typename Scalar>
class Ffn : public Layer<Scalar> {
 public:
  using TensorT = Tensor<Scalar>;
  using ParameterT = Parameter<Scalar>;

  Ffn(std::string name, Index channels, Index ratio, Rng& rng);

  TensorT forward(const TensorT& x, Mode mode) override;
  TensorT backward(const TensorT& grad_out) override;
  Shape describe(const Shape& in, CostTable* table) const override;
  void collect_parameters(std::vector<ParameterT*>& out) override;

  Linear<Scalar>& fc1() { return fc1_; }
  Linear<Scalar>& fc2() { return fc2_; }

 private:
  Linear<Scalar> fc1_;
  ActivationLayer<Scalar> act_;
  Linear<Scalar> fc2_;
};

enum class ConvPadding {
  kSame,   // k/2 zeros on each side
  kValid,  // none
};

/// Standard cross-correlation; kernel logical shape [k, k, Cin, Cout] stored as
/// a (k*k*Cin) x Cout matrix with row index (dy*k + dx)*Cin + ci.
template <typename Scalar>
class Conv2d : public Layer<Scalar> {
 public:
  using TensorT = Tensor<Scalar>;
  using ParameterT = Parameter<Scalar>;

  Conv2d(std::string name, Index in_channels, Index out_channels, Index kernel, Index stride,
         ConvPadding padding, bool bias, Rng& rng);

  TensorT forward(const TensorT& x, Mode mode) override;
  TensorT backward(const TensorT& grad_out) override;
  Shape describe(const Shape& in, CostTable* table) const override;
  void collect_parameters(std::vector<ParameterT*>& out) override;

  ParameterT& weight() { return weight_; }
  ParameterT& bias() { return *bias_; }
  Index kernel() const { return kernel_; }

 private:
  Shape out_shape(const Shape& in) const;
  Index pad() const { return padding_ == ConvPadding::kSame ? kernel_ / 2 : 0; }

  Index in_;
  Index out_;
  Index kernel_;
  Index stride_;
  ConvPadding padding_;
  ParameterT weight_;
  std::optional<ParameterT> bias_;
  Matrix<Scalar> columns_;
  Shape in_shape_;
};

/// Depthwise convolution, stride 1, same zero padding. Kernel logical shape
/// [k, k, C] stored as a (k*k) x C matrix.
template <typename Scalar>
class DwConv2d : public Layer<Scalar> {
 public:
  using TensorT = Tensor<Scalar>;
  using ParameterT = Parameter<Scalar>;

  DwConv2d(std::string name, Index channels, Index kernel, bool bias, Rng& rng);

  TensorT forward(const TensorT& x, Mode mode) override;
  TensorT backward(const TensorT& grad_out) override;
  Shape describe(const Shape& in, CostTable* table) const override;
  void collect_parameters(std::vector<ParameterT*>& out) override;

  ParameterT& weight() { return weight_; }
  ParameterT& bias() { return *bias_; }

 private:
  Index channels_;
  Index kernel_;
  ParameterT weight_;
  std::optional<ParameterT> bias_;
  TensorT input_;
};

/// Non-overlapping window average, kernel == stride (floor on odd extents).
template <typename Scalar>
class AvgPool2d : public Layer<Scalar> {
 public:
  using TensorT = Tensor<Scalar>;

  AvgPool2d(std::string name, Index window) : Layer<Scalar>(std::move(name)), window_(window) {}

  TensorT forward(const TensorT& x, Mode mode) override;
  TensorT backward(const TensorT& grad_out) override;
  Shape describe(const Shape& in, CostTable* table) const override;

 private:
  Index window_;
  Shape in_shape_;
};

/// Max pooling with implicit -inf padding.
template <typename Scalar>
class MaxPool2d : public Layer<Scalar> {
 public:
  using TensorT = Tensor<Scalar>;

  MaxPool2d(std::string name, Index kernel, Index stride, Index pad)
      : Layer<Scalar>(std::move(name)), kernel_(kernel), stride_(stride), pad_(pad) {}

  TensorT forward(const TensorT& x, Mode mode) override;
  TensorT backward(const TensorT& grad_out) override;
  Shape describe(const Shape& in, CostTable* table) const override;

 private:
  Index kernel_;
  Index stride_;
  Index pad_;
  Shape in_shape_;
  std::vector<Index> argmax_;  // flat input index per output element
};

template <typename Scalar>
class GlobalAvgPool : public Layer<Scalar> {
 public:
  using TensorT = Tensor<Scalar>;

  explicit GlobalAvgPool(std::string name) : Layer<Scalar>(std::move(name)) {}

  TensorT forward(const TensorT& x, Mode mode) override;
  TensorT backward(const TensorT& grad_out) override;
  Shape describe(const Shape& in, CostTable* table) const override;

 private:
  Shape in_shape_;
};

/// Layers applied in order.
template <typename Scalar>
class Sequential : public Layer<Scalar> {
 public:
  using TensorT = Tensor<Scalar>;
  using ParameterT = Parameter<Scalar>;

  explicit Sequential(std::string name) : Layer<Scalar>(std::move(name)) {}

  template <typename L, typename... Args>
  L& emplace(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }
  void push_back(LayerPtr<Scalar> layer) { layers_.push_back(std::move(layer)); }

  TensorT forward(const TensorT& x, Mode mode) override;
  TensorT backward(const TensorT& grad_out) override;
  Shape describe(const Shape& in, CostTable* table) const override;
  void collect_parameters(std::vector<ParameterT*>& out) override;

  std::size_t size() const { return layers_.size(); }
  Layer<Scalar>& at(std::size_t k) { return *layers_.at(k); }
  const Layer<Scalar>& at(std::size_t k) const { return *layers_.at(k); }

 private:
  std::vector<LayerPtr<Scalar>> layers_;
};

}  // namespace caterpillar
