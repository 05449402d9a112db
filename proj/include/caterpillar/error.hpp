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

#include <stdexcept>
#include <string>

namespace caterpillar {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes of two operands (or an operand and a parameter) disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration (SpcConfig, BlockConfig, ModelSpec, TrainConfig).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed bytes in a dataset, checkpoint or spec file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// An index or step outside its admissible range.
class RangeError : public Error {
 public:
  using Error::Error;
};

class ShiftRangeError : public RangeError {
 public:
  using RangeError::RangeError;
};

class ReflectRangeError : public RangeError {
 public:
  using RangeError::RangeError;
};

class IndexError : public RangeError {
 public:
  using RangeError::RangeError;
};

/// Training-mode batch statistics need at least two samples per channel.
class InsufficientBatchError : public Error {
 public:
  using Error::Error;
};

}  // namespace caterpillar
