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

#include <string_view>

#include "caterpillar/smlp.hpp"
#include "caterpillar/spc.hpp"

namespace caterpillar {

enum class LocalMixer { kSpc, kDwConv, kIdentity };

/// How the local mixer (L) and the global sMLP mixer (G) share the token-mixing
/// residual.
enum class CombineStrategy {
  kLocalGlobal,   // Y = G(a(BN(L(a(BN X))))) + X
  kGlobalLocal,   // same with L and G swapped
  kTwoResidual,   // Y1 = L(a(BN X)) + X;  Y = G(a(BN Y1)) + Y1
  kSum,           // U = a(BN X);  Y = X + L(U) + G(U)
  kWeightedSum,   // Y = X + alpha L(U) + beta G(U), alpha/beta learnable (init 1)
  kConcatReduce,  // Y = X + [L(U), G(U)] R, R a 2C x C projection
};

std::string_view to_string(LocalMixer m);
std::string_view to_string(CombineStrategy s);
LocalMixer parse_local_mixer(std::string_view s);
CombineStrategy parse_combine(std::string_view s);
bool is_parallel(CombineStrategy s);

struct BlockConfig {
  LocalMixer local_mixer = LocalMixer::kSpc;
  SpcConfig spc;
  Index dwconv_kernel = 3;
  CombineStrategy combine = CombineStrategy::kLocalGlobal;
  Index ffn_ratio = 3;
  bool mixer_bias = true;  // biases on the local mixer's projections

  bool operator==(const BlockConfig&) const = default;
};

/// Pass-through layer used as the "identity" local mixer.
template <typename Scalar>
class Identity : public Layer<Scalar> {
 public:
  using TensorT = Tensor<Scalar>;
  explicit Identity(std::string name) : Layer<Scalar>(std::move(name)) {}
  TensorT forward(const TensorT& x, Mode) override { return x; }
  TensorT backward(const TensorT& grad_out) override { return grad_out; }
  Shape describe(const Shape& in, CostTable*) const override { return in; }
};

/// Token-mixing (local + global mixers) followed by the FFN channel-mixing
/// sub-block Z = FFN(LN(Y)) + Y. With local_mixer = kSpc and kLocalGlobal this
/// is the Caterpillar block; with kDwConv it is the sMLPNet block.
template <typename Scalar>
class MixerBlock : public Layer<Scalar> {
 public:
  using TensorT = Tensor<Scalar>;
  using ParameterT = Parameter<Scalar>;

  MixerBlock(std::string name, const BlockConfig& cfg, Index height, Index width, Index channels, Rng& rng);

  TensorT forward(const TensorT& x, Mode mode) override;
  TensorT backward(const TensorT& grad_out) override;
  Shape describe(const Shape& in, CostTable* table) const override;
  void collect_parameters(std::vector<ParameterT*>& out) override;

  const BlockConfig& config() const { return cfg_; }
  Layer<Scalar>& local() { return *local_; }
  Smlp<Scalar>& global() { return global_; }
  BatchNorm2d<Scalar>& bn1() { return bn1_; }
  BatchNorm2d<Scalar>* bn2() { return bn2_ ? &*bn2_ : nullptr; }
  LayerNorm<Scalar>& ln() { return ln_; }
  Ffn<Scalar>& ffn() { return ffn_; }
  ParameterT* alpha() { return alpha_ ? &*alpha_ : nullptr; }
  ParameterT* beta() { return beta_ ? &*beta_ : nullptr; }
  Linear<Scalar>* combine_reduce() { return reduce_ ? &*reduce_ : nullptr; }

 private:
  TensorT token_mixing(const TensorT& x, Mode mode);
  TensorT token_mixing_backward(const TensorT& dy);

  BlockConfig cfg_;
  Index channels_;
  BatchNorm2d<Scalar> bn1_;
  ActivationLayer<Scalar> act1_;
  LayerPtr<Scalar> local_;
  std::optional<BatchNorm2d<Scalar>> bn2_;
  ActivationLayer<Scalar> act2_;
  Smlp<Scalar> global_;
  std::optional<ParameterT> alpha_;
  std::optional<ParameterT> beta_;
  std::optional<Linear<Scalar>> reduce_;
  LayerNorm<Scalar> ln_;
  Ffn<Scalar> ffn_;
  TensorT local_out_;
  TensorT global_out_;
};

/// Builds the configured local mixer for a C-channel map.
template <typename Scalar>
LayerPtr<Scalar> make_local_mixer(const std::string& block_name, const BlockConfig& cfg, Index channels,
                                  Rng& rng);

}  // namespace caterpillar
