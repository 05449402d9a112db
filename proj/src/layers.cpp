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

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <unsupported/Eigen/SpecialFunctions>

namespace caterpillar {

std::string scoped(const std::string& parent, const std::string& child) {
  if (parent.empty()) return child;
  if (child.empty()) return parent;
  return parent + "." + child;
}

template <typename Scalar>
Parameter<Scalar>::Parameter(std::string name_, ParamKind kind_, Matrix<Scalar> value_,
                             std::vector<Index> shape_)
    : name(std::move(name_)), kind(kind_), value(std::move(value_)), shape(std::move(shape_)) {
  grad = Matrix<Scalar>::Zero(value.rows(), value.cols());
  if (shape.empty()) {
    shape = value.rows() == 1 ? std::vector<Index>{value.cols()}
                              : std::vector<Index>{value.rows(), value.cols()};
  }
  Index total = 1;
  for (Index d : shape) total *= d;
  if (total != value.size()) {
    throw DimensionError("Parameter " + name + ": logical shape does not match " +
                         std::to_string(value.size()) + " elements");
  }
}

template <typename Scalar>
std::string Parameter<Scalar>::shape_str() const {
  std::ostringstream os;
  for (std::size_t k = 0; k < shape.size(); ++k) os << (k ? "x" : "") << shape[k];
  return os.str();
}

template <typename Scalar>
Matrix<Scalar> init_weight(Index rows, Index cols, Rng& rng) {
  Matrix<Scalar> m(rows, cols);
  for (Index k = 0; k < m.size(); ++k) {
    m.data()[k] = static_cast<Scalar>(rng.truncated_normal(0.02, 2.0));
  }
  return m;
}

namespace {

template <typename Scalar>
RowVector<Scalar> row_of(Index n, Scalar value) {
  return RowVector<Scalar>::Constant(n, value);
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> gelu(const Tensor<Scalar>& x) {
  const auto v = x.pillars().array();
  Matrix<Scalar> y = Scalar(0.5) * v * (Scalar(1) + (v * (Scalar(1) / std::numbers::sqrt2_v<Scalar>)).erf());
  return Tensor<Scalar>(x.shape(), std::move(y));
}

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& x) {
  return Tensor<Scalar>(x.shape(), x.pillars().cwiseMax(Scalar(0)));
}

// ---------------------------------------------------------------- Linear

template <typename Scalar>
Linear<Scalar>::Linear(std::string name, Index in_channels, Index out_channels, bool bias, Rng& rng)
    : Layer<Scalar>(std::move(name)),
      in_(in_channels),
      out_(out_channels),
      weight_(scoped(this->name_, "w"), ParamKind::kWeight,
              init_weight<Scalar>(in_channels, out_channels, rng)) {
  if (bias) {
    bias_.emplace(scoped(this->name_, "b"), ParamKind::kBias, Matrix<Scalar>::Zero(1, out_channels));
  }
}

template <typename Scalar>
Tensor<Scalar> Linear<Scalar>::forward(const Tensor<Scalar>& x, Mode) {
  input_ = x;
  if (bias_) {
    const RowVector<Scalar> b = bias_->value.row(0);
    return project_channels(x, weight_.value, &b);
  }
  return project_channels<Scalar>(x, weight_.value, nullptr);
}

template <typename Scalar>
Tensor<Scalar> Linear<Scalar>::backward(const Tensor<Scalar>& grad_out) {
  weight_.grad.noalias() += input_.pillars().transpose() * grad_out.pillars();
  if (bias_) bias_->grad += grad_out.pillars().colwise().sum();
  Shape s = grad_out.shape();
  s.c = in_;
  return TensorT(s, grad_out.pillars() * weight_.value.transpose());
}

template <typename Scalar>
Shape Linear<Scalar>::describe(const Shape& in, CostTable* table) const {
  if (in.c != in_) {
    throw DimensionError(this->name_ + ": expects C=" + std::to_string(in_) + ", got " + in.str());
  }
  Shape out = in;
  out.c = out_;
  if (table) {
    table->push_back({this->name_, "linear", out, in_ * out_ + (bias_ ? out_ : 0),
                      in.pillars() * in_ * out_});
  }
  return out;
}

template <typename Scalar>
void Linear<Scalar>::collect_parameters(std::vector<ParameterT*>& out) {
  out.push_back(&weight_);
  if (bias_) out.push_back(&*bias_);
}

// ---------------------------------------------------------------- BatchNorm2d

template <typename Scalar>
BatchNorm2d<Scalar>::BatchNorm2d(std::string name, Index channels)
    : Layer<Scalar>(std::move(name)),
      channels_(channels),
      gamma_(scoped(this->name_, "gamma"), ParamKind::kNorm, Matrix<Scalar>::Ones(1, channels)),
      beta_(scoped(this->name_, "beta"), ParamKind::kNorm, Matrix<Scalar>::Zero(1, channels)),
      running_mean_(scoped(this->name_, "running_mean"), ParamKind::kBuffer,
                    Matrix<Scalar>::Zero(1, channels)),
      running_var_(scoped(this->name_, "running_var"), ParamKind::kBuffer,
                   Matrix<Scalar>::Ones(1, channels)) {}

template <typename Scalar>
Tensor<Scalar> BatchNorm2d<Scalar>::forward(const Tensor<Scalar>& x, Mode mode) {
  if (x.c() != channels_) {
    throw DimensionError(this->name_ + ": expects C=" + std::to_string(channels_) + ", got " +
                         x.shape().str());
  }
  mode_ = mode;
  shape_ = x.shape();
  const Index count = x.shape().pillars();
  const auto eps = static_cast<Scalar>(kNormEpsilon);
  RowVector<Scalar> mean;
  RowVector<Scalar> var;
  if (mode == Mode::kTrain) {
    if (count < 2) {
      throw InsufficientBatchError(this->name_ + ": training-mode batch norm needs N*H*W >= 2, got " +
                                   std::to_string(count));
    }
    mean = x.pillars().colwise().sum() / static_cast<Scalar>(count);
    const Matrix<Scalar> centered = x.pillars().rowwise() - mean;
    var = centered.array().square().colwise().sum().matrix() / static_cast<Scalar>(count);
    const auto m = static_cast<Scalar>(kBatchNormMomentum);
    running_mean_.value.row(0) = (Scalar(1) - m) * running_mean_.value.row(0) + m * mean;
    const Scalar unbias = static_cast<Scalar>(count) / static_cast<Scalar>(count - 1);
    running_var_.value.row(0) = (Scalar(1) - m) * running_var_.value.row(0) + m * unbias * var;
  } else {
    mean = running_mean_.value.row(0);
    var = running_var_.value.row(0);
  }
  inv_std_ = (var.array() + eps).rsqrt().matrix();
  normalized_ = (x.pillars().rowwise() - mean) * inv_std_.asDiagonal();
  Matrix<Scalar> out = normalized_ * gamma_.value.row(0).asDiagonal();
  out.rowwise() += beta_.value.row(0);
  return TensorT(shape_, std::move(out));
}

template <typename Scalar>
Tensor<Scalar> BatchNorm2d<Scalar>::backward(const Tensor<Scalar>& grad_out) {
  const Matrix<Scalar>& dy = grad_out.pillars();
  const RowVector<Scalar> dy_sum = dy.colwise().sum();
  const RowVector<Scalar> dy_xhat = dy.cwiseProduct(normalized_).colwise().sum();
  gamma_.grad.row(0) += dy_xhat;
  beta_.grad.row(0) += dy_sum;
  const RowVector<Scalar> scale = gamma_.value.row(0).cwiseProduct(inv_std_);
  if (mode_ == Mode::kEval) {
    return TensorT(shape_, dy * scale.asDiagonal());
  }
  const auto count = static_cast<Scalar>(shape_.pillars());
  Matrix<Scalar> dx = dy;
  dx.rowwise() -= dy_sum / count;
  dx -= normalized_ * (dy_xhat / count).asDiagonal();
  return TensorT(shape_, dx * scale.asDiagonal());
}

template <typename Scalar>
Shape BatchNorm2d<Scalar>::describe(const Shape& in, CostTable* table) const {
  if (in.c != channels_) throw DimensionError(this->name_ + ": channel mismatch " + in.str());
  if (table) table->push_back({this->name_, "batchnorm", in, 2 * channels_, in.size()});
  return in;
}

template <typename Scalar>
void BatchNorm2d<Scalar>::collect_parameters(std::vector<ParameterT*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
  out.push_back(&running_mean_);
  out.push_back(&running_var_);
}

// ---------------------------------------------------------------- LayerNorm

template <typename Scalar>
LayerNorm<Scalar>::LayerNorm(std::string name, Index channels)
    : Layer<Scalar>(std::move(name)),
      channels_(channels),
      gamma_(scoped(this->name_, "gamma"), ParamKind::kNorm, Matrix<Scalar>::Ones(1, channels)),
      beta_(scoped(this->name_, "beta"), ParamKind::kNorm, Matrix<Scalar>::Zero(1, channels)) {}

template <typename Scalar>
Tensor<Scalar> LayerNorm<Scalar>::forward(const Tensor<Scalar>& x, Mode) {
  if (x.c() != channels_) {
    throw DimensionError(this->name_ + ": expects C=" + std::to_string(channels_) + ", got " +
                         x.shape().str());
  }
  shape_ = x.shape();
  const auto c = static_cast<Scalar>(channels_);
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mean = x.pillars().rowwise().sum() / c;
  Matrix<Scalar> centered = x.pillars().colwise() - mean;
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> var = centered.array().square().rowwise().sum() / c;
  inv_std_ = (var.array() + static_cast<Scalar>(kNormEpsilon)).rsqrt().matrix();
  normalized_ = inv_std_.asDiagonal() * centered;
  Matrix<Scalar> out = normalized_ * gamma_.value.row(0).asDiagonal();
  out.rowwise() += beta_.value.row(0);
  return TensorT(shape_, std::move(out));
}

template <typename Scalar>
Tensor<Scalar> LayerNorm<Scalar>::backward(const Tensor<Scalar>& grad_out) {
  const Matrix<Scalar>& dy = grad_out.pillars();
  gamma_.grad.row(0) += dy.cwiseProduct(normalized_).colwise().sum();
  beta_.grad.row(0) += dy.colwise().sum();
  const Matrix<Scalar> g = dy * gamma_.value.row(0).asDiagonal();
  const auto c = static_cast<Scalar>(channels_);
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> g_mean = g.rowwise().sum() / c;
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> gx_mean =
      g.cwiseProduct(normalized_).rowwise().sum() / c;
  Matrix<Scalar> dx = g.colwise() - g_mean;
  dx -= gx_mean.asDiagonal() * normalized_;
  return TensorT(shape_, inv_std_.asDiagonal() * dx);
}

template <typename Scalar>
Shape LayerNorm<Scalar>::describe(const Shape& in, CostTable* table) const {
  if (in.c != channels_) throw DimensionError(this->name_ + ": channel mismatch " + in.str());
  if (table) table->push_back({this->name_, "layernorm", in, 2 * channels_, in.size()});
  return in;
}

template <typename Scalar>
void LayerNorm<Scalar>::collect_parameters(std::vector<ParameterT*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

// ---------------------------------------------------------------- activations

template <typename Scalar>
Tensor<Scalar> ActivationLayer<Scalar>::forward(const Tensor<Scalar>& x, Mode) {
  input_ = x;
  return kind_ == Activation::kGelu ? gelu(x) : relu(x);
}

template <typename Scalar>
Tensor<Scalar> ActivationLayer<Scalar>::backward(const Tensor<Scalar>& grad_out) {
  Matrix<Scalar> d;
  if (kind_ == Activation::kGelu) {
    // d/dx x*Phi(x) = Phi(x) + x*phi(x)
    const auto v = input_.pillars().array();
    const Scalar inv_sqrt_2pi = std::numbers::inv_sqrtpi_v<Scalar> * (Scalar(1) / std::numbers::sqrt2_v<Scalar>);
    d = Scalar(0.5) * (Scalar(1) + (v * (Scalar(1) / std::numbers::sqrt2_v<Scalar>)).erf()) +
        v * (Scalar(-0.5) * v.square()).exp() * inv_sqrt_2pi;
  } else {
    d = input_.pillars().unaryExpr([](Scalar v) { return v > Scalar(0) ? Scalar(1) : Scalar(0); });
  }
  return TensorT(grad_out.shape(), grad_out.pillars().cwiseProduct(d));
}

template <typename Scalar>
Shape ActivationLayer<Scalar>::describe(const Shape& in, CostTable*) const {
  return in;
}

// ---------------------------------------------------------------- Ffn

template <typename Scalar>
Ffn<Scalar>::Ffn(std::string name, Index channels, Index ratio, Rng& rng)
    : Layer<Scalar>(std::move(name)),
      fc1_(scoped(this->name_, "fc1"), channels, channels * ratio, true, rng),
      act_(scoped(this->name_, "act"), Activation::kGelu),
      fc2_(scoped(this->name_, "fc2"), channels * ratio, channels, true, rng) {
  if (ratio < 1) throw ConfigError(this->name_ + ": ffn ratio must be >= 1");
}

template <typename Scalar>
Tensor<Scalar> Ffn<Scalar>::forward(const Tensor<Scalar>& x, Mode mode) {
  return fc2_.forward(act_.forward(fc1_.forward(x, mode), mode), mode);
}

template <typename Scalar>
Tensor<Scalar> Ffn<Scalar>::backward(const Tensor<Scalar>& grad_out) {
  return fc1_.backward(act_.backward(fc2_.backward(grad_out)));
}

template <typename Scalar>
Shape Ffn<Scalar>::describe(const Shape& in, CostTable* table) const {
  return fc2_.describe(fc1_.describe(in, table), table);
}

template <typename Scalar>
void Ffn<Scalar>::collect_parameters(std::vector<ParameterT*>& out) {
  fc1_.collect_parameters(out);
  fc2_.collect_parameters(out);
}

// ---------------------------------------------------------------- pooling

template <typename Scalar>
Tensor<Scalar> AvgPool2d<Scalar>::forward(const Tensor<Scalar>& x, Mode) {
  in_shape_ = x.shape();
  const Shape out_shape = describe(x.shape(), nullptr);
  TensorT out(out_shape);
  const Scalar inv = Scalar(1) / static_cast<Scalar>(window_ * window_);
  for (Index n = 0; n < out_shape.n; ++n)
    for (Index i = 0; i < out_shape.h; ++i)
      for (Index j = 0; j < out_shape.w; ++j) {
        auto dst = out.pillars().row(out.row(n, i, j));
        for (Index di = 0; di < window_; ++di)
          for (Index dj = 0; dj < window_; ++dj)
            dst += x.pillars().row(x.row(n, i * window_ + di, j * window_ + dj));
        dst *= inv;
      }
  return out;
}

template <typename Scalar>
Tensor<Scalar> AvgPool2d<Scalar>::backward(const Tensor<Scalar>& grad_out) {
  TensorT dx(in_shape_);
  const Scalar inv = Scalar(1) / static_cast<Scalar>(window_ * window_);
  const Shape& s = grad_out.shape();
  for (Index n = 0; n < s.n; ++n)
    for (Index i = 0; i < s.h; ++i)
      for (Index j = 0; j < s.w; ++j) {
        const auto g = grad_out.pillars().row(grad_out.row(n, i, j)) * inv;
        for (Index di = 0; di < window_; ++di)
          for (Index dj = 0; dj < window_; ++dj)
            dx.pillars().row(dx.row(n, i * window_ + di, j * window_ + dj)) += g;
      }
  return dx;
}

template <typename Scalar>
Shape AvgPool2d<Scalar>::describe(const Shape& in, CostTable*) const {
  if (in.h < window_ || in.w < window_) {
    throw DimensionError(this->name_ + ": window " + std::to_string(window_) + " exceeds " + in.str());
  }
  return Shape{in.n, in.h / window_, in.w / window_, in.c};
}

template <typename Scalar>
Tensor<Scalar> MaxPool2d<Scalar>::forward(const Tensor<Scalar>& x, Mode) {
  in_shape_ = x.shape();
  const Shape out_shape = describe(x.shape(), nullptr);
  TensorT out(out_shape);
  argmax_.assign(static_cast<std::size_t>(out_shape.size()), -1);
  const Index c = x.c();
  for (Index n = 0; n < out_shape.n; ++n)
    for (Index i = 0; i < out_shape.h; ++i)
      for (Index j = 0; j < out_shape.w; ++j)
        for (Index ch = 0; ch < c; ++ch) {
          Scalar best = -std::numeric_limits<Scalar>::infinity();
          Index best_at = -1;
          for (Index di = 0; di < kernel_; ++di)
            for (Index dj = 0; dj < kernel_; ++dj) {
              const Index si = i * stride_ + di - pad_;
              const Index sj = j * stride_ + dj - pad_;
              if (si < 0 || sj < 0 || si >= x.h() || sj >= x.w()) continue;
              const Scalar v = x(n, si, sj, ch);
              if (v > best) {
                best = v;
                best_at = x.row(n, si, sj) * c + ch;
              }
            }
          const Index o = out.row(n, i, j) * c + ch;
          out.data()[o] = best;
          argmax_[static_cast<std::size_t>(o)] = best_at;
        }
  return out;
}

template <typename Scalar>
Tensor<Scalar> MaxPool2d<Scalar>::backward(const Tensor<Scalar>& grad_out) {
  TensorT dx(in_shape_);
  for (Index o = 0; o < grad_out.shape().size(); ++o) {
    dx.data()[argmax_[static_cast<std::size_t>(o)]] += grad_out.data()[o];
  }
  return dx;
}

template <typename Scalar>
Shape MaxPool2d<Scalar>::describe(const Shape& in, CostTable*) const {
  const Index h = (in.h + 2 * pad_ - kernel_) / stride_ + 1;
  const Index w = (in.w + 2 * pad_ - kernel_) / stride_ + 1;
  if (in.h + 2 * pad_ < kernel_ || in.w + 2 * pad_ < kernel_) {
    throw DimensionError(this->name_ + ": kernel larger than padded input " + in.str());
  }
  return Shape{in.n, h, w, in.c};
}

template <typename Scalar>
Tensor<Scalar> GlobalAvgPool<Scalar>::forward(const Tensor<Scalar>& x, Mode) {
  in_shape_ = x.shape();
  return global_avg_pool(x);
}

template <typename Scalar>
Tensor<Scalar> GlobalAvgPool<Scalar>::backward(const Tensor<Scalar>& grad_out) {
  const Index per_image = in_shape_.h * in_shape_.w;
  Matrix<Scalar> dx(in_shape_.pillars(), in_shape_.c);
  for (Index n = 0; n < in_shape_.n; ++n) {
    dx.middleRows(n * per_image, per_image).rowwise() =
        grad_out.pillars().row(n) / static_cast<Scalar>(per_image);
  }
  return TensorT(in_shape_, std::move(dx));
}

template <typename Scalar>
Shape GlobalAvgPool<Scalar>::describe(const Shape& in, CostTable*) const {
  return Shape{in.n, 1, 1, in.c};
}

// ---------------------------------------------------------------- Sequential

template <typename Scalar>
Tensor<Scalar> Sequential<Scalar>::forward(const Tensor<Scalar>& x, Mode mode) {
  TensorT y = x;
  for (auto& layer : layers_) y = layer->forward(y, mode);
  return y;
}

template <typename Scalar>
Tensor<Scalar> Sequential<Scalar>::backward(const Tensor<Scalar>& grad_out) {
  TensorT g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

template <typename Scalar>
Shape Sequential<Scalar>::describe(const Shape& in, CostTable* table) const {
  Shape s = in;
  for (const auto& layer : layers_) s = layer->describe(s, table);
  return s;
}

template <typename Scalar>
void Sequential<Scalar>::collect_parameters(std::vector<ParameterT*>& out) {
  for (auto& layer : layers_) layer->collect_parameters(out);
}

#define CATERPILLAR_INSTANTIATE(Scalar)                                       \
  template struct Parameter<Scalar>;                                          \
  template Matrix<Scalar> init_weight<Scalar>(Index, Index, Rng&);            \
  template Tensor<Scalar> gelu(const Tensor<Scalar>&);                        \
  template Tensor<Scalar> relu(const Tensor<Scalar>&);                        \
  template class Linear<Scalar>;                                              \
  template class BatchNorm2d<Scalar>;                                         \
  template class LayerNorm<Scalar>;                                           \
  template class ActivationLayer<Scalar>;                                     \
  template class Ffn<Scalar>;                                                 \
  template class AvgPool2d<Scalar>;                                           \
  template class MaxPool2d<Scalar>;                                           \
  template class GlobalAvgPool<Scalar>;                                       \
  template class Sequential<Scalar>;

CATERPILLAR_INSTANTIATE(float)
CATERPILLAR_INSTANTIATE(double)

}  // namespace caterpillar
