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

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "caterpillar/models.hpp"

namespace caterpillar {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  ParamKind kind;
  std::vector<Index> shape;
  std::int64_t offset;  // in f32 elements from the start of the data blob
  std::int64_t count;
};

/// Parsed checkpoint: text manifest plus the little-endian f32 blob.
///
///   CATERPILLAR-CHECKPOINT 1
///   spec <bytes>
///   <ModelSpec text>
///   params <count>
///   <name> <kind> <d0>x<d1>... <offset> <count>      (one line per parameter)
///   data <bytes>
///   <f32 little-endian values>
struct Checkpoint {
  int version = kCheckpointVersion;
  std::string spec_text;
  std::vector<CheckpointEntry> entries;
  std::vector<float> data;
};

std::string_view to_string(ParamKind kind);
ParamKind parse_param_kind(std::string_view s);

template <typename Scalar>
Checkpoint make_checkpoint(Model<Scalar>& model);

void write_checkpoint(const Checkpoint& ckpt, std::ostream& os);
Checkpoint read_checkpoint(std::istream& is);

/// Copies checkpoint values into `model`; names and shapes must match exactly.
template <typename Scalar>
void apply_checkpoint(const Checkpoint& ckpt, Model<Scalar>& model);

template <typename Scalar>
void save_checkpoint(Model<Scalar>& model, const std::string& path);

/// Rebuilds the model from the stored spec and restores every parameter and buffer.
template <typename Scalar>
std::unique_ptr<Model<Scalar>> load_checkpoint(const std::string& path);

}  // namespace caterpillar
