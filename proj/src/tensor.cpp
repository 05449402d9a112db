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

#include "caterpillar/tensor.hpp"

#include <sstream>

namespace caterpillar {

std::string Shape::str() const {
  std::ostringstream os;
  os << "[" << n << "," << h << "," << w << "," << c << "]";
  return os.str();
}

void check_shape(const Shape& shape, const char* what) {
  if (shape.n < 1 || shape.h < 1 || shape.w < 1 || shape.c < 1) {
    throw DimensionError(std::string(what) + ": every dimension must be >= 1, got " + shape.str());
  }
}

template <typename Scalar>
Tensor<Scalar>::Tensor(const Shape& shape) : shape_(shape) {
  check_shape(shape, "Tensor");
  data_ = Storage::Zero(shape.pillars(), shape.c);
}

template <typename Scalar>
Tensor<Scalar>::Tensor(const Shape& shape, Storage pillars) : shape_(shape), data_(std::move(pillars)) {
  check_shape(shape, "Tensor");
  if (data_.rows() != shape.pillars() || data_.cols() != shape.c) {
    throw DimensionError("Tensor: storage is " + std::to_string(data_.rows()) + "x" +
                         std::to_string(data_.cols()) + " but shape " + shape.str() + " needs " +
                         std::to_string(shape.pillars()) + "x" + std::to_string(shape.c));
  }
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::constant(const Shape& shape, Scalar value) {
  check_shape(shape, "Tensor::constant");
  return Tensor(shape, Storage::Constant(shape.pillars(), shape.c, value));
}

template <typename Scalar>
Tensor<Scalar>& Tensor<Scalar>::operator+=(const Tensor& other) {
  if (!(shape_ == other.shape_)) {
    throw DimensionError("Tensor +=: " + shape_.str() + " vs " + other.shape_.str());
  }
  data_ += other.data_;
  return *this;
}

template <typename Scalar>
Tensor<Scalar>& Tensor<Scalar>::operator-=(const Tensor& other) {
  if (!(shape_ == other.shape_)) {
    throw DimensionError("Tensor -=: " + shape_.str() + " vs " + other.shape_.str());
  }
  data_ -= other.data_;
  return *this;
}

template <typename Scalar>
Tensor<Scalar> project_channels(const Tensor<Scalar>& x, const Matrix<Scalar>& w,
                                const RowVector<Scalar>* bias) {
  if (w.rows() != x.c()) {
    throw DimensionError("project_channels: input channels (axis C) = " + std::to_string(x.c()) +
                         " but weight rows = " + std::to_string(w.rows()));
  }
  if (bias != nullptr && bias->cols() != w.cols()) {
    throw DimensionError("project_channels: bias length " + std::to_string(bias->cols()) +
                         " != weight cols (Cout) " + std::to_string(w.cols()));
  }
  Shape out_shape = x.shape();
  out_shape.c = w.cols();
  Matrix<Scalar> out = x.pillars() * w;
  if (bias != nullptr) out.rowwise() += *bias;
  return Tensor<Scalar>(out_shape, std::move(out));
}

template <typename Scalar>
Tensor<Scalar> concat_channels(const std::vector<Tensor<Scalar>>& parts) {
  if (parts.empty()) throw DimensionError("concat_channels: no parts");
  Shape out_shape = parts.front().shape();
  out_shape.c = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.n != out_shape.n || s.h != out_shape.h || s.w != out_shape.w) {
      throw DimensionError("concat_channels: part " + s.str() + " does not match N,H,W of " +
                           parts.front().shape().str());
    }
    out_shape.c += s.c;
  }
  Matrix<Scalar> out(out_shape.pillars(), out_shape.c);
  Index offset = 0;
  for (const auto& p : parts) {
    out.middleCols(offset, p.c()) = p.pillars();
    offset += p.c();
  }
  return Tensor<Scalar>(out_shape, std::move(out));
}

template <typename Scalar>
Tensor<Scalar> slice_channels(const Tensor<Scalar>& x, Index offset, Index count) {
  if (offset < 0 || count < 1 || offset + count > x.c()) {
    throw DimensionError("slice_channels: [" + std::to_string(offset) + "," +
                         std::to_string(offset + count) + ") outside C=" + std::to_string(x.c()));
  }
  Shape s = x.shape();
  s.c = count;
  return Tensor<Scalar>(s, x.pillars().middleCols(offset, count));
}

template <typename Scalar>
Tensor<Scalar> global_avg_pool(const Tensor<Scalar>& x) {
  const Shape& s = x.shape();
  const Index per_image = s.h * s.w;
  Matrix<Scalar> out(s.n, s.c);
  for (Index n = 0; n < s.n; ++n) {
    out.row(n) = x.pillars().middleRows(n * per_image, per_image).colwise().sum() /
                 static_cast<Scalar>(per_image);
  }
  return Tensor<Scalar>(Shape{s.n, 1, 1, s.c}, std::move(out));
}

#define CATERPILLAR_INSTANTIATE(Scalar)                                                         \
  template class Tensor<Scalar>;                                                                \
  template Tensor<Scalar> project_channels(const Tensor<Scalar>&, const Matrix<Scalar>&,        \
                                           const RowVector<Scalar>*);                           \
  template Tensor<Scalar> concat_channels(const std::vector<Tensor<Scalar>>&);                  \
  template Tensor<Scalar> slice_channels(const Tensor<Scalar>&, Index, Index);                  \
  template Tensor<Scalar> global_avg_pool(const Tensor<Scalar>&);

CATERPILLAR_INSTANTIATE(float)
CATERPILLAR_INSTANTIATE(double)

}  // namespace caterpillar
