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
#include <memory>
#include <string>
#include <vector>

#include "caterpillar/rng.hpp"
#include "caterpillar/tensor.hpp"

namespace caterpillar {

/// How the optimizer and the accounting treat a parameter.
enum class ParamKind {
  kWeight,  // linear/conv weight: weight decay applies
  kBias,
  kNorm,    // norm affine gamma/beta
  kScale,   // free learnable scalars, e.g. weighted-sum branch weights
  kBuffer,  // running statistics: serialized, never optimized, not counted
};

/// A named weight plus a same-shaped gradient accumulator. `shape` is the
/// logical shape recorded in checkpoints; `value` holds the same elements in
/// row-major order.
template <typename Scalar>
struct Parameter {
  Parameter(std::string name, ParamKind kind, Matrix<Scalar> value, std::vector<Index> shape = {});

  std::string name;
  ParamKind kind;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;
  std::vector<Index> shape;

  Index size() const { return value.size(); }
  bool trainable() const { return kind != ParamKind::kBuffer; }
  bool decays() const { return kind == ParamKind::kWeight; }
  void zero_grad() { grad.setZero(); }
  std::string shape_str() const;
};

/// Truncated normal (std 0.02, clipped at two standard deviations).
template <typename Scalar>
Matrix<Scalar> init_weight(Index rows, Index cols, Rng& rng);

enum class Mode { kTrain, kEval };

/// One row of a parameter/MAC accounting table.
struct CostRow {
  std::string layer;
  std::string kind;
  Shape output;
  std::int64_t params = 0;
  std::int64_t macs = 0;  // per batch of output.n images
};

using CostTable = std::vector<CostRow>;

/// Differentiable layer with an explicit backward. The layer caches whatever
/// its backward needs during forward; backward must follow the matching
/// forward and accumulates into the parameter gradients.
template <typename Scalar>
class Layer {
 public:
  using TensorT = Tensor<Scalar>;
  using ParameterT = Parameter<Scalar>;

  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;
  Layer(const Layer&) = delete;
  Layer& operator=(const Layer&) = delete;

  virtual TensorT forward(const TensorT& x, Mode mode) = 0;
  virtual TensorT backward(const TensorT& grad_out) = 0;

  /// Output shape for input `in`; appends closed-form parameter and MAC counts
  /// of every leaf layer to `table` when it is non-null.
  virtual Shape describe(const Shape& in, CostTable* table) const = 0;

  virtual void collect_parameters(std::vector<ParameterT*>& out) { (void)out; }

  const std::string& name() const { return name_; }

  std::vector<ParameterT*> parameters() {
    std::vector<ParameterT*> out;
    collect_parameters(out);
    return out;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }

 protected:
  std::string name_;
};

template <typename Scalar>
using LayerPtr = std::unique_ptr<Layer<Scalar>>;

/// Joins a parent scope and a child name with a dot, skipping empty parts.
std::string scoped(const std::string& parent, const std::string& child);

}  // namespace caterpillar
