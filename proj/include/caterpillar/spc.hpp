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
#include <string>
#include <string_view>
#include <vector>

#include "caterpillar/layers.hpp"

namespace caterpillar {

enum class Direction { kUp, kDown, kLeft, kRight, kCenter, kUpLeft, kUpRight, kDownLeft, kDownRight };
enum class PaddingMode { kZero, kReplicate, kCircular, kReflect };
enum class MixingWay { kReduceConcatFuse, kReduceConcat, kConcatFuse, kSumFuse, kSum };

std::string_view to_string(Direction d);
std::string_view to_string(PaddingMode m);
std::string_view to_string(MixingWay m);
Direction parse_direction(std::string_view s);
PaddingMode parse_padding(std::string_view s);
MixingWay parse_mixing(std::string_view s);

/// Row and column offset of the neighbour read by direction `d` at step `s`:
/// map[i, j] = x[i + dy, j + dx].
struct Offset {
  Index dy = 0;
  Index dx = 0;
};
Offset direction_offset(Direction d, Index steps);

bool uses_reduce(MixingWay m);
bool uses_fuse(MixingWay m);

/// Direction set, shift steps, padding and mixing way of one SPC operator.
struct SpcConfig {
  std::vector<Direction> directions = preset(4);
  Index steps = 1;
  PaddingMode padding = PaddingMode::kZero;
  MixingWay mixing = MixingWay::kReduceConcatFuse;

  /// 4: up,down,left,right; 5: +center; 8: 4 + diagonals; 9: 8 + center.
  static std::vector<Direction> preset(int count);

  Index direction_count() const { return static_cast<Index>(directions.size()); }

  /// Throws ConfigError when the direction list is empty or repeats, steps are
  /// negative, or a reduce mode cannot split `channels` evenly.
  void validate(Index channels) const;

  /// Flat "key=value" form: directions=4 steps=1 padding=zero mixing=reduce_concat_fuse.
  std::string str() const;

  /// Applies whitespace/';'-separated key=value tokens on top of `base`.
  static SpcConfig parse(std::string_view text, const SpcConfig& base);
  static SpcConfig parse(std::string_view text);

  bool operator==(const SpcConfig&) const = default;
};

/// Drops the rows/columns that leave the frame when reading towards `dir`:
/// up drops the first s rows, down the last s, left the first s columns,
/// right the last s; diagonals drop on both axes; center returns x.
template <typename Scalar>
Tensor<Scalar> shift2d(const Tensor<Scalar>& x, Direction dir, Index steps);

/// Restores the original extent of a shift2d result by appending s rows/cols on
/// the vacated side. `source` is the tensor that was shifted; only circular
/// padding reads it (the wrapped rows are the ones shift2d dropped).
template <typename Scalar>
Tensor<Scalar> pad2d(const Tensor<Scalar>& shrunk, Direction dir, Index steps, PaddingMode mode,
                     const Tensor<Scalar>& source);

/// One neighbouring map per configured direction, in configuration order.
template <typename Scalar>
std::vector<Tensor<Scalar>> pillars_shift(const Tensor<Scalar>& x, const SpcConfig& cfg);

/// Adjoint of pillars_shift: sums the per-map gradients back onto the input.
template <typename Scalar>
Tensor<Scalar> pillars_shift_backward(const std::vector<Tensor<Scalar>>& grad_maps,
                                      const SpcConfig& cfg);

/// Shifted-Pillars-Concatenation: pillars_shift followed by the configured
/// reduce / concat / sum / fuse mixing.
template <typename Scalar>
class Spc : public Layer<Scalar> {
 public:
  using TensorT = Tensor<Scalar>;
  using ParameterT = Parameter<Scalar>;

  Spc(std::string name, SpcConfig cfg, Index channels, Index out_channels, bool bias, Rng& rng);
  Spc(std::string name, SpcConfig cfg, Index channels, bool bias, Rng& rng)
      : Spc(std::move(name), std::move(cfg), channels, channels, bias, rng) {}

  TensorT forward(const TensorT& x, Mode mode) override;
  TensorT backward(const TensorT& grad_out) override;
  Shape describe(const Shape& in, CostTable* table) const override;
  void collect_parameters(std::vector<ParameterT*>& out) override;

  /// Mixing stage alone, on maps produced by pillars_shift.
  TensorT concat(const std::vector<TensorT>& maps, Mode mode = Mode::kEval);

  const SpcConfig& config() const { return cfg_; }
  Index in_channels() const { return in_; }
  Index out_channels() const { return out_; }
  Linear<Scalar>& reduce(Index d) { return *reduce_.at(static_cast<std::size_t>(d)); }
  Index reduce_count() const { return static_cast<Index>(reduce_.size()); }
  Linear<Scalar>* fuse() { return fuse_ ? &*fuse_ : nullptr; }

 private:
  SpcConfig cfg_;
  Index in_;
  Index out_;
  std::vector<std::unique_ptr<Linear<Scalar>>> reduce_;
  std::optional<Linear<Scalar>> fuse_;
  Shape in_shape_;
};

}  // namespace caterpillar
