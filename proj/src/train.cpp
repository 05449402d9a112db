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


#include <cmath>
#include <cstdio>
#include <numbers>

#include "caterpillar/checkpoint.hpp"
#include "caterpillar/error.hpp"
#include "caterpillar/train.hpp"

namespace caterpillar {

void TrainConfig::validate() const {
  if (total_steps < 1) throw ConfigError("total_steps must be positive");
  if (warmup_steps < 0 || (warmup_steps > 0 && warmup_steps >= total_steps))
    throw ConfigError("warmup_steps must be smaller than total_steps");
  for (double r : {lr_peak, lr_min, warmup_lr, weight_decay, eps})
    if (!(r >= 0) || !std::isfinite(r)) throw ConfigError("rates must be finite and non-negative");
  if (lr_min > lr_peak) throw ConfigError("lr_min must not exceed lr_peak");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw ConfigError("betas must lie in [0,1)");
  if (!(label_smoothing >= 0 && label_smoothing < 1)) throw ConfigError("label_smoothing must lie in [0,1)");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
}

double cosine_lr(Index step, const TrainConfig& cfg) {
  if (step < 0 || step > cfg.total_steps)
    throw RangeError("step " + std::to_string(step) + " outside [0," + std::to_string(cfg.total_steps) + "]");
  if (step < cfg.warmup_steps) {
    const double t = static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
    return cfg.warmup_lr + (cfg.lr_peak - cfg.warmup_lr) * t;
  }
  const double span = static_cast<double>(cfg.total_steps - cfg.warmup_steps);
  const double progress = static_cast<double>(step - cfg.warmup_steps) / span;
  return cfg.lr_min + 0.5 * (cfg.lr_peak - cfg.lr_min) * (1.0 + std::cos(std::numbers::pi * progress));
}

template <typename Scalar>
void AdamW<Scalar>::step(const std::vector<Parameter<Scalar>*>& params, double lr) {
  if (m_.empty()) {
    for (auto* p : params) {
      m_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (m_.size() != params.size()) throw ConfigError("AdamW: parameter list changed between steps");
  for (auto* p : params)
    if (p->trainable() && !p->grad.allFinite()) throw NumericError("non-finite gradient in '" + p->name + "'");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const auto b1 = static_cast<Scalar>(cfg_.beta1);
  const auto b2 = static_cast<Scalar>(cfg_.beta2);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    if (!p.trainable()) continue;
    auto& m = m_[k];
    auto& v = v_[k];
    m = b1 * m + (Scalar(1) - b1) * p.grad;
    v = b2 * v + (Scalar(1) - b2) * p.grad.cwiseProduct(p.grad);
    if (p.decays()) p.value -= static_cast<Scalar>(lr * cfg_.weight_decay) * p.value;
    const auto m_hat = m.array() / static_cast<Scalar>(c1);
    const auto v_hat = v.array() / static_cast<Scalar>(c2);
    p.value.array() -= static_cast<Scalar>(lr) * m_hat / (v_hat.sqrt() + static_cast<Scalar>(cfg_.eps));
  }
}

template <typename Scalar>
LossResult<Scalar> ce_label_smoothing(const Matrix<Scalar>& logits, const std::vector<int>& labels,
                                      double smoothing) {
  const Index n = logits.rows();
  const Index k = logits.cols();
  if (n != static_cast<Index>(labels.size()))
    throw DimensionError("ce: " + std::to_string(n) + " logit rows for " + std::to_string(labels.size()) + " labels");
  if (!(smoothing >= 0 && smoothing < 1)) throw ConfigError("label smoothing must lie in [0,1)");
  LossResult<Scalar> out;
  out.dlogits.resize(n, k);
  const double off = smoothing / static_cast<double>(k);
  double total = 0;
  for (Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= k) throw IndexError("label " + std::to_string(y) + " outside [0," + std::to_string(k) + ")");
    const auto row = logits.row(i);
    Index best = 0;
    const double z_max = static_cast<double>(row.maxCoeff(&best));
    if (best == y) ++out.correct;
    double sum = 0;
    for (Index j = 0; j < k; ++j) sum += std::exp(static_cast<double>(row(j)) - z_max);
    const double log_sum = std::log(sum);
    // The targets sum to one, so the loss is log_sum minus the target-weighted (z_j - z_max).
    double centered_sum = 0;
    for (Index j = 0; j < k; ++j) {
      const double centered = static_cast<double>(row(j)) - z_max;
      centered_sum += centered;
      const double t = off + (j == y ? 1.0 - smoothing : 0.0);
      out.dlogits(i, j) = static_cast<Scalar>((std::exp(centered - log_sum) - t) / static_cast<double>(n));
    }
    const double row_loss =
        log_sum - (1.0 - smoothing) * (static_cast<double>(row(y)) - z_max) - off * centered_sum;
    total += row_loss;
  }
  out.loss = total / static_cast<double>(n);
  return out;
}

std::string TrainHistory::csv() const {
  std::string out = "step,lr,loss,acc\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g\n", static_cast<long long>(r.step), r.lr, r.loss, r.acc);
    out += buf;
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> gather_images(const LabeledImages& data, const std::vector<Index>& indices) {
  return data.subset(indices).images.template cast<Scalar>();
}

namespace {

std::vector<int> gather_labels(const LabeledImages& data, const std::vector<Index>& indices) {
  std::vector<int> out;
  out.reserve(indices.size());
  for (Index i : indices) out.push_back(data.labels.at(static_cast<std::size_t>(i)));
  return out;
}

template <typename Scalar>
void check_binding(const Model<Scalar>& model, const LabeledImages& data) {
  data.validate();
  const auto& spec = model.spec();
  if (data.images.h() != spec.input_h || data.images.w() != spec.input_w || data.images.c() != spec.input_c)
    throw DimensionError("dataset images " + data.image_shape().str() + " do not match model input " +
                         model.input_shape(1).str());
  if (data.class_count > spec.num_classes)
    throw DimensionError("dataset has " + std::to_string(data.class_count) + " classes, model predicts " +
                         std::to_string(spec.num_classes));
}

}  // namespace

template <typename Scalar>
double accumulate_gradients(Model<Scalar>& model, const LabeledImages& data, const std::vector<Index>& indices,
                            Index shard_size, double smoothing, Mode mode) {
  if (shard_size < 1) throw ConfigError("shard size must be positive");
  model.zero_grad();
  const auto total = static_cast<double>(indices.size());
  double loss = 0;
  for (std::size_t start = 0; start < indices.size(); start += static_cast<std::size_t>(shard_size)) {
    const std::size_t stop = std::min(indices.size(), start + static_cast<std::size_t>(shard_size));
    const std::vector<Index> shard(indices.begin() + static_cast<std::ptrdiff_t>(start),
                                   indices.begin() + static_cast<std::ptrdiff_t>(stop));
    const auto logits = model.forward(gather_images<Scalar>(data, shard), mode);
    auto res = ce_label_smoothing<Scalar>(logits.pillars(), gather_labels(data, shard), smoothing);
    const double weight = static_cast<double>(shard.size()) / total;
    loss += weight * res.loss;
    res.dlogits *= static_cast<Scalar>(weight);
    model.backward(Tensor<Scalar>(logits.shape(), std::move(res.dlogits)));
  }
  return loss;
}

template <typename Scalar>
double evaluate(Model<Scalar>& model, const LabeledImages& data, Index batch_size) {
  check_binding(model, data);
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  Index correct = 0;
  for (Index start = 0; start < data.size(); start += batch_size) {
    std::vector<Index> idx;
    for (Index i = start; i < std::min(data.size(), start + batch_size); ++i) idx.push_back(i);
    const auto logits = model.forward(gather_images<Scalar>(data, idx), Mode::kEval);
    for (Index r = 0; r < logits.pillars().rows(); ++r) {
      Index best = 0;
      logits.pillars().row(r).maxCoeff(&best);
      if (best == data.labels[static_cast<std::size_t>(idx[static_cast<std::size_t>(r)])]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

template <typename Scalar>
TrainHistory train_loop(Model<Scalar>& model, const LabeledImages& data, const TrainConfig& cfg,
                        const TrainOptions& options) {
  cfg.validate();
  check_binding(model, data);
  Rng rng(cfg.seed);
  AdamW<Scalar> opt(cfg);
  const auto params = model.parameters();
  TrainHistory history;
  std::vector<Index> order;
  std::size_t cursor = 0;
  Index perfect_run = 0;
  for (Index step = 0; step < cfg.total_steps; ++step) {
    if (cursor >= order.size()) {
      order.resize(static_cast<std::size_t>(data.size()));
      for (Index i = 0; i < data.size(); ++i) order[static_cast<std::size_t>(i)] = i;
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
      cursor = 0;
    }
    const std::size_t stop = std::min(order.size(), cursor + static_cast<std::size_t>(cfg.batch_size));
    const std::vector<Index> batch(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                                   order.begin() + static_cast<std::ptrdiff_t>(stop));
    cursor = stop;
    const double lr = cosine_lr(step, cfg);
    HistoryRow row{step, lr, 0, 0};
    try {
      model.zero_grad();
      const auto logits = model.forward(gather_images<Scalar>(data, batch), Mode::kTrain);
      auto res = ce_label_smoothing<Scalar>(logits.pillars(), gather_labels(data, batch), cfg.label_smoothing);
      if (!std::isfinite(res.loss)) throw NumericError("non-finite loss");
      row.loss = res.loss;
      row.acc = static_cast<double>(res.correct) / static_cast<double>(batch.size());
      model.backward(Tensor<Scalar>(logits.shape(), std::move(res.dlogits)));
      opt.step(params, lr);
    } catch (const NumericError& e) {
      throw NumericError("step " + std::to_string(step) + ": " + e.what());
    }
    history.rows.push_back(row);
    if (options.on_step) options.on_step(row);
    if (options.checkpoint_every > 0 && (step + 1) % options.checkpoint_every == 0) {
      CheckpointEvent ev{step + 1, options.checkpoint_prefix + "_step" + std::to_string(step + 1) + ".ckpt", 0};
      save_checkpoint(model, ev.path);
      ev.train_accuracy = evaluate(model, data, cfg.batch_size);
      history.checkpoints.push_back(ev);
    }
    perfect_run = row.acc == 1.0 ? perfect_run + 1 : 0;
    if (options.stop_after_perfect > 0 && perfect_run >= options.stop_after_perfect) break;
  }
  return history;
}

template LossResult<float> ce_label_smoothing<float>(const Matrix<float>&, const std::vector<int>&, double);
template LossResult<double> ce_label_smoothing<double>(const Matrix<double>&, const std::vector<int>&, double);

#define CATERPILLAR_INSTANTIATE(S)                                                                                \
  template class AdamW<S>;                                                                                        \
  template Tensor<S> gather_images<S>(const LabeledImages&, const std::vector<Index>&);                            \
  template double accumulate_gradients<S>(Model<S>&, const LabeledImages&, const std::vector<Index>&, Index, double, \
                                          Mode);                                                                  \
  template double evaluate<S>(Model<S>&, const LabeledImages&, Index);                                            \
  template TrainHistory train_loop<S>(Model<S>&, const LabeledImages&, const TrainConfig&, const TrainOptions&);

CATERPILLAR_INSTANTIATE(float)
CATERPILLAR_INSTANTIATE(double)

}  // namespace caterpillar
