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

#include "caterpillar/layers.hpp"

namespace caterpillar {

/// Sparse-MLP global token mixer. A horizontal branch mixes every row with a
/// shared W x W matrix, a vertical branch mixes every column with a shared
/// H x H matrix, an identity branch passes x through; the three are
/// concatenated in that order and fused by a 3C x C projection.
///
/// The mixing matrices are bound to one (H, W), so a model using this layer is
/// bound to one input resolution.
template <typename Scalar>
class Smlp : public Layer<Scalar> {
 public:
  using TensorT = Tensor<Scalar>;
  using ParameterT = Parameter<Scalar>;

  Smlp(std::string name, Index height, Index width, Index channels, bool bias, Rng& rng);

  TensorT forward(const TensorT& x, Mode mode) override;
  TensorT backward(const TensorT& grad_out) override;
  Shape describe(const Shape& in, CostTable* table) const override;
  void collect_parameters(std::vector<ParameterT*>& out) override;

  /// w_h[j, j']: weight of input column j in output column j'.
  ParameterT& row_mixer() { return w_h_; }
  /// w_v[i, i']: weight of input row i in output row i'.
  ParameterT& column_mixer() { return w_v_; }
  Linear<Scalar>& fuse() { return fuse_; }
  bool has_bias() const { return b_h_.has_value(); }
  ParameterT& row_bias() { return *b_h_; }
  ParameterT& column_bias() { return *b_v_; }

 private:
  TensorT mix_rows(const TensorT& x) const;
  TensorT mix_columns(const TensorT& x) const;

  Index height_;
  Index width_;
  Index channels_;
  ParameterT w_h_;
  ParameterT w_v_;
  std::optional<ParameterT> b_h_;
  std::optional<ParameterT> b_v_;
  Linear<Scalar> fuse_;
  TensorT input_;
};

/// H^2 + W^2 + 3C^2, plus W + H + C when biased.
std::int64_t smlp_param_count(Index height, Index width, Index channels, bool biased);

}  // namespace caterpillar
