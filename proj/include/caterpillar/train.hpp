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
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "caterpillar/data.hpp"
#include "caterpillar/models.hpp"

namespace caterpillar {

/// Optimizer and schedule settings. Defaults follow the usual ImageNet recipe
/// for this family; warmup is counted in optimizer steps.
struct TrainConfig {
  double lr_peak = 1e-3;
  double lr_min = 1e-5;
  double warmup_lr = 1e-6;
  Index warmup_steps = 0;
  Index total_steps = 100;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double label_smoothing = 0.1;
  Index batch_size = 64;
  std::uint64_t seed = 0;

  /// Throws ConfigError on warmup_steps >= total_steps (with warmup), negative
  /// rates, lr_min > lr_peak, a smoothing outside [0,1) or betas outside [0,1).
  void validate() const;
};

/// Linear warmup warmup_lr -> lr_peak over warmup_steps, then cosine decay to lr_min at total_steps.
double cosine_lr(Index step, const TrainConfig& cfg);

/// AdamW with bias correction and decoupled weight decay on kWeight parameters:
/// theta -= lr * wd * theta + lr * m_hat / (sqrt(v_hat) + eps).
template <typename Scalar>
class AdamW {
 public:
  explicit AdamW(const TrainConfig& cfg) : cfg_(cfg) {}

  /// One update of every trainable parameter from its accumulated gradient.
  void step(const std::vector<Parameter<Scalar>*>& params, double lr);

  Index steps() const { return t_; }

 private:
  TrainConfig cfg_;
  Index t_ = 0;
  std::vector<Matrix<Scalar>> m_;
  std::vector<Matrix<Scalar>> v_;
};

template <typename Scalar>
struct LossResult {
  double loss = 0;
  Matrix<Scalar> dlogits;  // N x K, gradient of the batch-mean loss
  Index correct = 0;       // argmax hits
};

/// Mean over the batch of -sum_k target_k log softmax(z)_k, target = (1-s) onehot + s/K.
template <typename Scalar>
LossResult<Scalar> ce_label_smoothing(const Matrix<Scalar>& logits, const std::vector<int>& labels, double smoothing);

struct HistoryRow {
  Index step;
  double lr;
  double loss;
  double acc;  // batch accuracy of the forward pass that produced `loss`
};

struct CheckpointEvent {
  Index step;               // number of completed optimizer steps
  std::string path;
  double train_accuracy;    // eval-mode accuracy on the whole training set
};

struct TrainHistory {
  std::vector<HistoryRow> rows;
  std::vector<CheckpointEvent> checkpoints;

  /// "step,lr,loss,acc" header plus one row per step, fixed 17-digit precision.
  std::string csv() const;
};

struct TrainOptions {
  Index checkpoint_every = 0;      // 0 disables
  std::string checkpoint_prefix;   // files are <prefix>_step<k>.ckpt
  Index stop_after_perfect = 0;    // stop once this many consecutive batches hit 100%; 0 runs all steps
  std::function<void(const HistoryRow&)> on_step;
};

/// Deterministic minibatch loop: each epoch is a Fisher-Yates shuffle of the
/// sample indices seeded from cfg.seed, consumed in batch_size chunks (the
/// tail chunk is kept). Batchnorm runs in train mode.
template <typename Scalar>
TrainHistory train_loop(Model<Scalar>& model, const LabeledImages& data, const TrainConfig& cfg,
                        const TrainOptions& options = {});

/// Top-1 accuracy with eval-mode normalization.
template <typename Scalar>
double evaluate(Model<Scalar>& model, const LabeledImages& data, Index batch_size = 64);

/// Batch of samples `indices` as a model input tensor.
template <typename Scalar>
Tensor<Scalar> gather_images(const LabeledImages& data, const std::vector<Index>& indices);

/// Accumulates parameter gradients of the mean loss over `indices`, processing
/// them in shards of `shard_size`; each shard's gradient is weighted by its
/// share of the batch. Returns the batch-mean loss. Gradients are zeroed first.
template <typename Scalar>
double accumulate_gradients(Model<Scalar>& model, const LabeledImages& data, const std::vector<Index>& indices,
                            Index shard_size, double smoothing, Mode mode);

}  // namespace caterpillar
