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

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "caterpillar/error.hpp"

namespace caterpillar {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// Extents of a rank-4 (batch, rows, cols, channels) tensor.
struct Shape {
  Index n = 1;
  Index h = 1;
  Index w = 1;
  Index c = 1;

  Index pillars() const { return n * h * w; }
  Index size() const { return n * h * w * c; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Dense NHWC tensor. Storage is one row-major (N*H*W) x C matrix so that every
/// row is one pillar and per-pillar linear maps are single matrix products.
template <typename Scalar>
class Tensor {
 public:
  using Storage = Matrix<Scalar>;

  Tensor() : Tensor(Shape{}) {}
  explicit Tensor(const Shape& shape);
  Tensor(const Shape& shape, Storage pillars);

  static Tensor constant(const Shape& shape, Scalar value);

  const Shape& shape() const { return shape_; }
  Index n() const { return shape_.n; }
  Index h() const { return shape_.h; }
  Index w() const { return shape_.w; }
  Index c() const { return shape_.c; }

  const Storage& pillars() const { return data_; }
  Storage& pillars() { return data_; }

  Index row(Index n, Index i, Index j) const { return (n * shape_.h + i) * shape_.w + j; }
  Scalar& operator()(Index n, Index i, Index j, Index c) { return data_(row(n, i, j), c); }
  Scalar operator()(Index n, Index i, Index j, Index c) const { return data_(row(n, i, j), c); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  /// Image n as an H x (W*C) row-major block.
  Eigen::Map<const Storage> image(Index n) const {
    return Eigen::Map<const Storage>(data_.data() + n * shape_.h * shape_.w * shape_.c, shape_.h,
                                     shape_.w * shape_.c);
  }
  Eigen::Map<Storage> image(Index n) {
    return Eigen::Map<Storage>(data_.data() + n * shape_.h * shape_.w * shape_.c, shape_.h,
                               shape_.w * shape_.c);
  }

  bool all_finite() const { return data_.allFinite(); }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, data_.template cast<Other>());
  }

  Tensor& operator+=(const Tensor& other);
  Tensor& operator-=(const Tensor& other);
  Tensor& operator*=(Scalar s) {
    data_ *= s;
    return *this;
  }

 private:
  Shape shape_;
  Storage data_;
};

template <typename Scalar>
Tensor<Scalar> operator+(Tensor<Scalar> a, const Tensor<Scalar>& b) {
  a += b;
  return a;
}

template <typename Scalar>
Tensor<Scalar> operator-(Tensor<Scalar> a, const Tensor<Scalar>& b) {
  a -= b;
  return a;
}

template <typename Scalar>
Tensor<Scalar> operator*(Scalar s, Tensor<Scalar> a) {
  a *= s;
  return a;
}

/// Throws DimensionError unless every extent is at least one.
void check_shape(const Shape& shape, const char* what);

/// out[n,i,j,:] = x[n,i,j,:]^T * w + b, applied independently to every pillar.
template <typename Scalar>
Tensor<Scalar> project_channels(const Tensor<Scalar>& x, const Matrix<Scalar>& w,
                                const RowVector<Scalar>* bias = nullptr);

/// Channel-wise concatenation in list order.
template <typename Scalar>
Tensor<Scalar> concat_channels(const std::vector<Tensor<Scalar>>& parts);

/// Channels [offset, offset + count) of x.
template <typename Scalar>
Tensor<Scalar> slice_channels(const Tensor<Scalar>& x, Index offset, Index count);

template <typename Scalar>
Tensor<Scalar> global_avg_pool(const Tensor<Scalar>& x);

}  // namespace caterpillar
