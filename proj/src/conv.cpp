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

#include "caterpillar/layers.hpp"

namespace caterpillar {

// ---------------------------------------------------------------- Conv2d

template <typename Scalar>
Conv2d<Scalar>::Conv2d(std::string name, Index in_channels, Index out_channels, Index kernel,
                       Index stride, ConvPadding padding, bool bias, Rng& rng)
    : Layer<Scalar>(std::move(name)),
      in_(in_channels),
      out_(out_channels),
      kernel_(kernel),
      stride_(stride),
      padding_(padding),
      weight_(scoped(this->name_, "w"), ParamKind::kWeight,
              init_weight<Scalar>(kernel * kernel * in_channels, out_channels, rng),
              {kernel, kernel, in_channels, out_channels}) {
  if (kernel < 1 || stride < 1) throw ConfigError(this->name_ + ": kernel and stride must be >= 1");
  if (padding == ConvPadding::kSame && kernel % 2 == 0) {
    throw ConfigError(this->name_ + ": same padding needs an odd kernel, got " + std::to_string(kernel));
  }
  if (bias) {
    bias_.emplace(scoped(this->name_, "b"), ParamKind::kBias, Matrix<Scalar>::Zero(1, out_channels));
  }
}

template <typename Scalar>
Shape Conv2d<Scalar>::out_shape(const Shape& in) const {
  if (in.c != in_) {
    throw DimensionError(this->name_ + ": expects C=" + std::to_string(in_) + ", got " + in.str());
  }
  const Index p = pad();
  if (in.h + 2 * p < kernel_ || in.w + 2 * p < kernel_) {
    throw DimensionError(this->name_ + ": kernel " + std::to_string(kernel_) +
                         " larger than padded input " + in.str());
  }
  return Shape{in.n, (in.h + 2 * p - kernel_) / stride_ + 1, (in.w + 2 * p - kernel_) / stride_ + 1,
               out_};
}

template <typename Scalar>
Tensor<Scalar> Conv2d<Scalar>::forward(const Tensor<Scalar>& x, Mode) {
  const Shape os = out_shape(x.shape());
  in_shape_ = x.shape();
  const Index p = pad();
  columns_ = Matrix<Scalar>::Zero(os.pillars(), kernel_ * kernel_ * in_);
  for (Index n = 0; n < os.n; ++n)
    for (Index i = 0; i < os.h; ++i)
      for (Index j = 0; j < os.w; ++j) {
        const Index r = (n * os.h + i) * os.w + j;
        for (Index dy = 0; dy < kernel_; ++dy) {
          const Index si = i * stride_ + dy - p;
          if (si < 0 || si >= x.h()) continue;
          for (Index dx = 0; dx < kernel_; ++dx) {
            const Index sj = j * stride_ + dx - p;
            if (sj < 0 || sj >= x.w()) continue;
            columns_.row(r).segment((dy * kernel_ + dx) * in_, in_) = x.pillars().row(x.row(n, si, sj));
          }
        }
      }
  Matrix<Scalar> out = columns_ * weight_.value;
  if (bias_) out.rowwise() += bias_->value.row(0);
  return TensorT(os, std::move(out));
}

template <typename Scalar>
Tensor<Scalar> Conv2d<Scalar>::backward(const Tensor<Scalar>& grad_out) {
  const Matrix<Scalar>& dy_mat = grad_out.pillars();
  weight_.grad.noalias() += columns_.transpose() * dy_mat;
  if (bias_) bias_->grad += dy_mat.colwise().sum();
  const Matrix<Scalar> dcols = dy_mat * weight_.value.transpose();
  TensorT dx(in_shape_);
  const Shape& os = grad_out.shape();
  const Index p = pad();
  for (Index n = 0; n < os.n; ++n)
    for (Index i = 0; i < os.h; ++i)
      for (Index j = 0; j < os.w; ++j) {
        const Index r = (n * os.h + i) * os.w + j;
        for (Index ky = 0; ky < kernel_; ++ky) {
          const Index si = i * stride_ + ky - p;
          if (si < 0 || si >= in_shape_.h) continue;
          for (Index kx = 0; kx < kernel_; ++kx) {
            const Index sj = j * stride_ + kx - p;
            if (sj < 0 || sj >= in_shape_.w) continue;
            dx.pillars().row(dx.row(n, si, sj)) += dcols.row(r).segment((ky * kernel_ + kx) * in_, in_);
          }
        }
      }
  return dx;
}

template <typename Scalar>
Shape Conv2d<Scalar>::describe(const Shape& in, CostTable* table) const {
  const Shape os = out_shape(in);
  if (table) {
    table->push_back({this->name_, "conv" + std::to_string(kernel_) + "x" + std::to_string(kernel_), os,
                      kernel_ * kernel_ * in_ * out_ + (bias_ ? out_ : 0),
                      os.pillars() * kernel_ * kernel_ * in_ * out_});
  }
  return os;
}

template <typename Scalar>
void Conv2d<Scalar>::collect_parameters(std::vector<ParameterT*>& out) {
  out.push_back(&weight_);
  if (bias_) out.push_back(&*bias_);
}

// ---------------------------------------------------------------- DwConv2d

template <typename Scalar>
DwConv2d<Scalar>::DwConv2d(std::string name, Index channels, Index kernel, bool bias, Rng& rng)
    : Layer<Scalar>(std::move(name)),
      channels_(channels),
      kernel_(kernel),
      weight_(scoped(this->name_, "w"), ParamKind::kWeight,
              init_weight<Scalar>(kernel * kernel, channels, rng), {kernel, kernel, channels}) {
  if (kernel < 1 || kernel % 2 == 0) {
    throw ConfigError(this->name_ + ": depthwise kernel must be odd, got " + std::to_string(kernel));
  }
  if (bias) {
    bias_.emplace(scoped(this->name_, "b"), ParamKind::kBias, Matrix<Scalar>::Zero(1, channels));
  }
}

template <typename Scalar>
Tensor<Scalar> DwConv2d<Scalar>::forward(const Tensor<Scalar>& x, Mode) {
  describe(x.shape(), nullptr);
  input_ = x;
  TensorT out(x.shape());
  const Index p = kernel_ / 2;
  for (Index n = 0; n < x.n(); ++n)
    for (Index i = 0; i < x.h(); ++i)
      for (Index j = 0; j < x.w(); ++j) {
        auto dst = out.pillars().row(out.row(n, i, j));
        for (Index dy = 0; dy < kernel_; ++dy) {
          const Index si = i + dy - p;
          if (si < 0 || si >= x.h()) continue;
          for (Index dx = 0; dx < kernel_; ++dx) {
            const Index sj = j + dx - p;
            if (sj < 0 || sj >= x.w()) continue;
            dst += x.pillars().row(x.row(n, si, sj)).cwiseProduct(weight_.value.row(dy * kernel_ + dx));
          }
        }
        if (bias_) dst += bias_->value.row(0);
      }
  return out;
}

template <typename Scalar>
Tensor<Scalar> DwConv2d<Scalar>::backward(const Tensor<Scalar>& grad_out) {
  TensorT dx(input_.shape());
  const Index p = kernel_ / 2;
  const TensorT& x = input_;
  for (Index n = 0; n < x.n(); ++n)
    for (Index i = 0; i < x.h(); ++i)
      for (Index j = 0; j < x.w(); ++j) {
        const auto g = grad_out.pillars().row(grad_out.row(n, i, j));
        for (Index ky = 0; ky < kernel_; ++ky) {
          const Index si = i + ky - p;
          if (si < 0 || si >= x.h()) continue;
          for (Index kx = 0; kx < kernel_; ++kx) {
            const Index sj = j + kx - p;
            if (sj < 0 || sj >= x.w()) continue;
            const Index tap = ky * kernel_ + kx;
            const Index src = x.row(n, si, sj);
            weight_.grad.row(tap) += g.cwiseProduct(x.pillars().row(src));
            dx.pillars().row(src) += g.cwiseProduct(weight_.value.row(tap));
          }
        }
      }
  if (bias_) bias_->grad += grad_out.pillars().colwise().sum();
  return dx;
}

template <typename Scalar>
Shape DwConv2d<Scalar>::describe(const Shape& in, CostTable* table) const {
  if (in.c != channels_) {
    throw DimensionError(this->name_ + ": expects C=" + std::to_string(channels_) + ", got " + in.str());
  }
  const Index p = kernel_ / 2;
  if (in.h + 2 * p < kernel_ || in.w + 2 * p < kernel_) {
    throw DimensionError(this->name_ + ": kernel larger than padded input " + in.str());
  }
  if (table) {
    table->push_back({this->name_, "dwconv" + std::to_string(kernel_) + "x" + std::to_string(kernel_),
                      in, kernel_ * kernel_ * channels_ + (bias_ ? channels_ : 0),
                      in.pillars() * kernel_ * kernel_ * channels_});
  }
  return in;
}

template <typename Scalar>
void DwConv2d<Scalar>::collect_parameters(std::vector<ParameterT*>& out) {
  out.push_back(&weight_);
  if (bias_) out.push_back(&*bias_);
}

template class Conv2d<float>;
template class Conv2d<double>;
template class DwConv2d<float>;
template class DwConv2d<double>;

}  // namespace caterpillar
