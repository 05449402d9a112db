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

#include "caterpillar/smlp.hpp"

namespace caterpillar {

std::int64_t smlp_param_count(Index height, Index width, Index channels, bool biased) {
  std::int64_t count = height * height + width * width + 3 * channels * channels;
  if (biased) count += width + height + channels;
  return count;
}

template <typename Scalar>
Smlp<Scalar>::Smlp(std::string name, Index height, Index width, Index channels, bool bias, Rng& rng)
    : Layer<Scalar>(std::move(name)),
      height_(height),
      width_(width),
      channels_(channels),
      w_h_(scoped(this->name_, "row_mix.w"), ParamKind::kWeight, init_weight<Scalar>(width, width, rng)),
      w_v_(scoped(this->name_, "col_mix.w"), ParamKind::kWeight, init_weight<Scalar>(height, height, rng)),
      fuse_(scoped(this->name_, "fuse"), 3 * channels, channels, bias, rng) {
  if (bias) {
    b_h_.emplace(scoped(this->name_, "row_mix.b"), ParamKind::kBias, Matrix<Scalar>::Zero(1, width));
    b_v_.emplace(scoped(this->name_, "col_mix.b"), ParamKind::kBias, Matrix<Scalar>::Zero(1, height));
  }
}

template <typename Scalar>
Tensor<Scalar> Smlp<Scalar>::mix_rows(const Tensor<Scalar>& x) const {
  TensorT out(x.shape());
  const Index rows = x.n() * x.h();
  const Matrix<Scalar> wt = w_h_.value.transpose();
  for (Index k = 0; k < rows; ++k) {
    auto dst = out.pillars().middleRows(k * width_, width_);
    dst.noalias() = wt * x.pillars().middleRows(k * width_, width_);
    if (b_h_) dst.colwise() += b_h_->value.row(0).transpose();
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> Smlp<Scalar>::mix_columns(const Tensor<Scalar>& x) const {
  TensorT out(x.shape());
  const Matrix<Scalar> wt = w_v_.value.transpose();
  for (Index n = 0; n < x.n(); ++n) {
    auto dst = out.image(n);
    dst.noalias() = wt * x.image(n);
    if (b_v_) dst.colwise() += b_v_->value.row(0).transpose();
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> Smlp<Scalar>::forward(const Tensor<Scalar>& x, Mode mode) {
  describe(x.shape(), nullptr);
  input_ = x;
  return fuse_.forward(concat_channels(std::vector<TensorT>{mix_rows(x), mix_columns(x), x}), mode);
}

template <typename Scalar>
Tensor<Scalar> Smlp<Scalar>::backward(const Tensor<Scalar>& grad_out) {
  const TensorT g = fuse_.backward(grad_out);
  const TensorT g_rows = slice_channels(g, 0, channels_);
  const TensorT g_cols = slice_channels(g, channels_, channels_);
  TensorT dx = slice_channels(g, 2 * channels_, channels_);

  const Index rows = input_.n() * input_.h();
  for (Index k = 0; k < rows; ++k) {
    const auto gk = g_rows.pillars().middleRows(k * width_, width_);
    const auto xk = input_.pillars().middleRows(k * width_, width_);
    w_h_.grad.noalias() += xk * gk.transpose();
    dx.pillars().middleRows(k * width_, width_).noalias() += w_h_.value * gk;
    if (b_h_) b_h_->grad.row(0) += gk.rowwise().sum().transpose();
  }
  for (Index n = 0; n < input_.n(); ++n) {
    const auto gn = g_cols.image(n);
    w_v_.grad.noalias() += input_.image(n) * gn.transpose();
    dx.image(n).noalias() += w_v_.value * gn;
    if (b_v_) b_v_->grad.row(0) += gn.rowwise().sum().transpose();
  }
  return dx;
}

template <typename Scalar>
Shape Smlp<Scalar>::describe(const Shape& in, CostTable* table) const {
  if (in.h != height_ || in.w != width_ || in.c != channels_) {
    throw DimensionError(this->name_ + ": bound to H=" + std::to_string(height_) + " W=" +
                         std::to_string(width_) + " C=" + std::to_string(channels_) + ", got " + in.str());
  }
  if (table) {
    const Index bias = b_h_ ? 1 : 0;
    table->push_back({scoped(this->name_, "row_mix"), "smlp_rows", in, width_ * width_ + bias * width_,
                      in.n * height_ * width_ * width_ * channels_});
    table->push_back({scoped(this->name_, "col_mix"), "smlp_cols", in, height_ * height_ + bias * height_,
                      in.n * width_ * height_ * height_ * channels_});
  }
  Shape cat = in;
  cat.c = 3 * channels_;
  return fuse_.describe(cat, table);
}

template <typename Scalar>
void Smlp<Scalar>::collect_parameters(std::vector<ParameterT*>& out) {
  out.push_back(&w_h_);
  if (b_h_) out.push_back(&*b_h_);
  out.push_back(&w_v_);
  if (b_v_) out.push_back(&*b_v_);
  fuse_.collect_parameters(out);
}

template class Smlp<float>;
template class Smlp<double>;

}  // namespace caterpillar
