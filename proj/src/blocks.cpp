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

#include "caterpillar/blocks.hpp"

namespace caterpillar {

namespace {

constexpr std::string_view kMixerNames[] = {"spc", "dwconv", "identity"};
constexpr std::string_view kCombineNames[] = {"LG", "GL", "two_residual", "sum", "weighted_sum", "concat_reduce"};

}  // namespace

std::string_view to_string(LocalMixer m) { return kMixerNames[static_cast<int>(m)]; }
std::string_view to_string(CombineStrategy s) { return kCombineNames[static_cast<int>(s)]; }

LocalMixer parse_local_mixer(std::string_view s) {
  for (int k = 0; k < 3; ++k)
    if (kMixerNames[k] == s) return static_cast<LocalMixer>(k);
  throw ConfigError("unknown local mixer '" + std::string(s) + "' (spc, dwconv, identity)");
}

CombineStrategy parse_combine(std::string_view s) {
  for (int k = 0; k < 6; ++k)
    if (kCombineNames[k] == s) return static_cast<CombineStrategy>(k);
  throw ConfigError("unknown combine strategy '" + std::string(s) + "'");
}

bool is_parallel(CombineStrategy s) {
  return s == CombineStrategy::kSum || s == CombineStrategy::kWeightedSum || s == CombineStrategy::kConcatReduce;
}

template <typename Scalar>
LayerPtr<Scalar> make_local_mixer(const std::string& block_name, const BlockConfig& cfg, Index channels,
                                  Rng& rng) {
  switch (cfg.local_mixer) {
    case LocalMixer::kSpc:
      return std::make_unique<Spc<Scalar>>(scoped(block_name, "spc"), cfg.spc, channels, cfg.mixer_bias, rng);
    case LocalMixer::kDwConv:
      return std::make_unique<DwConv2d<Scalar>>(scoped(block_name, "dwconv"), channels, cfg.dwconv_kernel,
                                                cfg.mixer_bias, rng);
    case LocalMixer::kIdentity:
      return std::make_unique<Identity<Scalar>>(scoped(block_name, "identity"));
  }
  throw ConfigError("unreachable local mixer");
}

template <typename Scalar>
MixerBlock<Scalar>::MixerBlock(std::string name, const BlockConfig& cfg, Index height, Index width,
                               Index channels, Rng& rng)
    : Layer<Scalar>(std::move(name)),
      cfg_(cfg),
      channels_(channels),
      bn1_(scoped(this->name_, "bn1"), channels),
      act1_(scoped(this->name_, "act1"), Activation::kGelu),
      local_(make_local_mixer<Scalar>(this->name_, cfg, channels, rng)),
      act2_(scoped(this->name_, "act2"), Activation::kGelu),
      global_(scoped(this->name_, "smlp"), height, width, channels, true, rng),
      ln_(scoped(this->name_, "ln"), channels),
      ffn_(scoped(this->name_, "ffn"), channels, cfg.ffn_ratio, rng) {
  if (!is_parallel(cfg.combine)) bn2_.emplace(scoped(this->name_, "bn2"), channels);
  if (cfg.combine == CombineStrategy::kWeightedSum) {
    alpha_.emplace(scoped(this->name_, "combine.alpha"), ParamKind::kScale, Matrix<Scalar>::Ones(1, 1));
    beta_.emplace(scoped(this->name_, "combine.beta"), ParamKind::kScale, Matrix<Scalar>::Ones(1, 1));
  }
  if (cfg.combine == CombineStrategy::kConcatReduce) {
    reduce_.emplace(scoped(this->name_, "combine.reduce"), 2 * channels, channels, true, rng);
  }
}

template <typename Scalar>
Tensor<Scalar> MixerBlock<Scalar>::token_mixing(const Tensor<Scalar>& x, Mode mode) {
  auto pre1 = [&](const Tensor<Scalar>& t) { return act1_.forward(bn1_.forward(t, mode), mode); };
  auto pre2 = [&](const Tensor<Scalar>& t) { return act2_.forward(bn2_->forward(t, mode), mode); };
  switch (cfg_.combine) {
    case CombineStrategy::kLocalGlobal:
      return x + global_.forward(pre2(local_->forward(pre1(x), mode)), mode);
    case CombineStrategy::kGlobalLocal:
      return x + local_->forward(pre2(global_.forward(pre1(x), mode)), mode);
    case CombineStrategy::kTwoResidual: {
      const TensorT y1 = x + local_->forward(pre1(x), mode);
      return y1 + global_.forward(pre2(y1), mode);
    }
    case CombineStrategy::kSum: {
      const TensorT u = pre1(x);
      return x + local_->forward(u, mode) + global_.forward(u, mode);
    }
    case CombineStrategy::kWeightedSum: {
      const TensorT u = pre1(x);
      local_out_ = local_->forward(u, mode);
      global_out_ = global_.forward(u, mode);
      const Scalar a = alpha_->value(0, 0);
      const Scalar b = beta_->value(0, 0);
      return TensorT(x.shape(), x.pillars() + a * local_out_.pillars() + b * global_out_.pillars());
    }
    case CombineStrategy::kConcatReduce: {
      const TensorT u = pre1(x);
      std::vector<TensorT> parts{local_->forward(u, mode), global_.forward(u, mode)};
      return x + reduce_->forward(concat_channels(parts), mode);
    }
  }
  throw ConfigError("unreachable combine strategy");
}

template <typename Scalar>
Tensor<Scalar> MixerBlock<Scalar>::token_mixing_backward(const Tensor<Scalar>& dy) {
  auto pre1_back = [&](const Tensor<Scalar>& g) { return bn1_.backward(act1_.backward(g)); };
  auto pre2_back = [&](const Tensor<Scalar>& g) { return bn2_->backward(act2_.backward(g)); };
  switch (cfg_.combine) {
    case CombineStrategy::kLocalGlobal:
      return dy + pre1_back(local_->backward(pre2_back(global_.backward(dy))));
    case CombineStrategy::kGlobalLocal:
      return dy + pre1_back(global_.backward(pre2_back(local_->backward(dy))));
    case CombineStrategy::kTwoResidual: {
      const TensorT dy1 = dy + pre2_back(global_.backward(dy));
      return dy1 + pre1_back(local_->backward(dy1));
    }
    case CombineStrategy::kSum:
      return dy + pre1_back(local_->backward(dy) + global_.backward(dy));
    case CombineStrategy::kWeightedSum: {
      const Scalar a = alpha_->value(0, 0);
      const Scalar b = beta_->value(0, 0);
      alpha_->grad(0, 0) += dy.pillars().cwiseProduct(local_out_.pillars()).sum();
      beta_->grad(0, 0) += dy.pillars().cwiseProduct(global_out_.pillars()).sum();
      return dy + pre1_back(local_->backward(a * dy) + global_.backward(b * dy));
    }
    case CombineStrategy::kConcatReduce: {
      const TensorT dc = reduce_->backward(dy);
      return dy + pre1_back(local_->backward(slice_channels(dc, 0, channels_)) +
                            global_.backward(slice_channels(dc, channels_, channels_)));
    }
  }
  throw ConfigError("unreachable combine strategy");
}

template <typename Scalar>
Tensor<Scalar> MixerBlock<Scalar>::forward(const Tensor<Scalar>& x, Mode mode) {
  const TensorT y = token_mixing(x, mode);
  return y + ffn_.forward(ln_.forward(y, mode), mode);
}

template <typename Scalar>
Tensor<Scalar> MixerBlock<Scalar>::backward(const Tensor<Scalar>& grad_out) {
  const TensorT dy = grad_out + ln_.backward(ffn_.backward(grad_out));
  return token_mixing_backward(dy);
}

template <typename Scalar>
Shape MixerBlock<Scalar>::describe(const Shape& in, CostTable* table) const {
  if (in.c != channels_) {
    throw DimensionError(this->name_ + ": expects C=" + std::to_string(channels_) + ", got " + in.str());
  }
  bn1_.describe(in, table);
  switch (cfg_.combine) {
    case CombineStrategy::kLocalGlobal:
    case CombineStrategy::kTwoResidual:
      local_->describe(in, table);
      bn2_->describe(in, table);
      global_.describe(in, table);
      break;
    case CombineStrategy::kGlobalLocal:
      global_.describe(in, table);
      bn2_->describe(in, table);
      local_->describe(in, table);
      break;
    case CombineStrategy::kSum:
      local_->describe(in, table);
      global_.describe(in, table);
      break;
    case CombineStrategy::kWeightedSum:
      local_->describe(in, table);
      global_.describe(in, table);
      if (table) table->push_back({scoped(this->name_, "combine"), "weighted_sum", in, 2, 2 * in.size()});
      break;
    case CombineStrategy::kConcatReduce: {
      local_->describe(in, table);
      global_.describe(in, table);
      Shape cat = in;
      cat.c = 2 * channels_;
      reduce_->describe(cat, table);
      break;
    }
  }
  ln_.describe(in, table);
  return ffn_.describe(in, table);
}

template <typename Scalar>
void MixerBlock<Scalar>::collect_parameters(std::vector<ParameterT*>& out) {
  bn1_.collect_parameters(out);
  local_->collect_parameters(out);
  if (bn2_) bn2_->collect_parameters(out);
  global_.collect_parameters(out);
  if (alpha_) out.push_back(&*alpha_);
  if (beta_) out.push_back(&*beta_);
  if (reduce_) reduce_->collect_parameters(out);
  ln_.collect_parameters(out);
  ffn_.collect_parameters(out);
}

template LayerPtr<float> make_local_mixer<float>(const std::string&, const BlockConfig&, Index, Rng&);
template LayerPtr<double> make_local_mixer<double>(const std::string&, const BlockConfig&, Index, Rng&);
template class MixerBlock<float>;
template class MixerBlock<double>;

}  // namespace caterpillar
