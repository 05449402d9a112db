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

#include <doctest.h>

#include <map>

#include "caterpillar/blocks.hpp"
#include "caterpillar/gradcheck.hpp"
#include "caterpillar/models.hpp"
#include "oracles.hpp"

using namespace caterpillar;
using T = Tensor<double>;
using M = Matrix<double>;

namespace {

constexpr CombineStrategy kStrategies[] = {CombineStrategy::kLocalGlobal, CombineStrategy::kGlobalLocal,
                                           CombineStrategy::kTwoResidual, CombineStrategy::kSum,
                                           CombineStrategy::kWeightedSum, CombineStrategy::kConcatReduce};
constexpr LocalMixer kMixers[] = {LocalMixer::kSpc, LocalMixer::kDwConv, LocalMixer::kIdentity};

BlockConfig block_config(LocalMixer mixer, CombineStrategy combine, bool mixer_bias = true) {
  BlockConfig cfg;
  cfg.local_mixer = mixer;
  cfg.combine = combine;
  cfg.mixer_bias = mixer_bias;
  return cfg;
}

std::unique_ptr<MixerBlock<double>> make_block(const BlockConfig& cfg, Index c = 8, Index hw = 4,
                                               std::uint64_t seed = 1) {
  Rng rng(seed);
  return std::make_unique<MixerBlock<double>>("block", cfg, hw, hw, c, rng);
}

/// Copies every parameter of `from` whose name also exists in `to`.
void copy_shared(MixerBlock<double>& from, MixerBlock<double>& to) {
  std::map<std::string, Parameter<double>*> src;
  for (auto* p : from.parameters()) src[p->name] = p;
  for (auto* p : to.parameters()) {
    auto it = src.find(p->name);
    if (it != src.end()) p->value = it->second->value;
  }
}

void randomize(MixerBlock<double>& b, std::uint64_t seed) {
  for (auto* p : b.parameters())
    if (p->kind == ParamKind::kBias || p->kind == ParamKind::kNorm)
      p->value = oracle::uniform_matrix(p->value.rows(), p->value.cols(), seed++, 0.5, 1.0);
}

}  // namespace

TEST_CASE("zero weights make every block the identity, bit-exact") {
  const T x = oracle::uniform(Shape{2, 4, 4, 8}, 1);
  for (CombineStrategy s : kStrategies)
    for (LocalMixer m : kMixers) {
      auto block = make_block(block_config(m, s));
      for (auto* p : block->parameters())
        if (p->kind != ParamKind::kBuffer) p->value.setZero();
      CHECK_MESSAGE(block->forward(x, Mode::kTrain).pillars() == x.pillars(), to_string(s), " ", to_string(m));
    }
}

TEST_CASE("zeroing only the output projections keeps the residual path") {
  const T x = oracle::uniform(Shape{1, 4, 4, 8}, 2);
  auto block = make_block(block_config(LocalMixer::kSpc, CombineStrategy::kLocalGlobal));
  randomize(*block, 10);
  block->global().fuse().weight().value.setZero();
  block->global().fuse().bias().value.setZero();
  block->ffn().fc2().weight().value.setZero();
  block->ffn().fc2().bias().value.setZero();
  CHECK(block->forward(x, Mode::kTrain).pillars() == x.pillars());

  auto two = make_block(block_config(LocalMixer::kDwConv, CombineStrategy::kTwoResidual));
  randomize(*two, 20);
  two->local().parameters()[0]->value.setZero();
  two->local().parameters()[1]->value.setZero();
  two->global().fuse().weight().value.setZero();
  two->global().fuse().bias().value.setZero();
  two->ffn().fc2().weight().value.setZero();
  two->ffn().fc2().bias().value.setZero();
  CHECK(two->forward(x, Mode::kTrain).pillars() == x.pillars());
}

TEST_CASE("weighted_sum with a=1, b=0 is the local branch plus residual") {
  const T x = oracle::uniform(Shape{1, 4, 4, 8}, 3);
  auto ws = make_block(block_config(LocalMixer::kSpc, CombineStrategy::kWeightedSum));
  auto sum = make_block(block_config(LocalMixer::kSpc, CombineStrategy::kSum), 8, 4, 99);
  randomize(*ws, 30);
  copy_shared(*ws, *sum);
  ws->beta()->value(0, 0) = 0.0;
  sum->global().fuse().weight().value.setZero();
  sum->global().fuse().bias().value.setZero();
  CHECK(oracle::rel_error(ws->forward(x, Mode::kTrain), sum->forward(x, Mode::kTrain)) < 1e-12);
  CHECK(ws->alpha()->value(0, 0) == 1.0);
  CHECK(ws->alpha()->kind == ParamKind::kScale);
}

TEST_CASE("combine parameter deltas") {
  const Index c = 8;
  for (LocalMixer m : kMixers) {
    auto sum = make_block(block_config(m, CombineStrategy::kSum));
    auto ws = make_block(block_config(m, CombineStrategy::kWeightedSum));
    auto cr = make_block(block_config(m, CombineStrategy::kConcatReduce));
    auto lg = make_block(block_config(m, CombineStrategy::kLocalGlobal));
    const auto base = count_params<double>(*sum);
    CHECK(count_params<double>(*ws) - base == 2);
    CHECK(count_params<double>(*cr) - base == 2 * c * c + c);
    // LG, GL and two_residual carry a second batch norm.
    CHECK(count_params<double>(*lg) - base == 2 * c);
    CHECK(count_params<double>(*cr) - count_params<double>(*lg) == 2 * c * c + c - 2 * c);
    CHECK(count_params<double>(*ws) - count_params<double>(*lg) == 2 - 2 * c);
  }
}

TEST_CASE("caterpillar minus sMLPNet block is 2C^2 - 9C for biasless mixers") {
  for (Index c : {8, 16, 80}) {
    auto spc = make_block(block_config(LocalMixer::kSpc, CombineStrategy::kLocalGlobal, false), c, 4);
    auto dw = make_block(block_config(LocalMixer::kDwConv, CombineStrategy::kLocalGlobal, false), c, 4);
    CHECK(count_params<double>(*spc) - count_params<double>(*dw) == 2 * c * c - 9 * c);
    auto spcb = make_block(block_config(LocalMixer::kSpc, CombineStrategy::kLocalGlobal, true), c, 4);
    auto dwb = make_block(block_config(LocalMixer::kDwConv, CombineStrategy::kLocalGlobal, true), c, 4);
    CHECK(count_params<double>(*spcb) - count_params<double>(*dwb) == 2 * c * c - 8 * c);
  }
}

TEST_CASE("center-one dwconv block equals the identity-mixer block") {
  const T x = oracle::uniform(Shape{2, 4, 4, 8}, 4);
  for (CombineStrategy s : kStrategies) {
    auto dw = make_block(block_config(LocalMixer::kDwConv, s));
    auto id = make_block(block_config(LocalMixer::kIdentity, s), 8, 4, 5);
    randomize(*id, 40);
    copy_shared(*id, *dw);
    auto& k = dw->local().parameters()[0]->value;
    k.setZero();
    k.row(4).setOnes();
    dw->local().parameters()[1]->value.setZero();
    CHECK_MESSAGE(dw->forward(x, Mode::kTrain).pillars() == id->forward(x, Mode::kTrain).pillars(), to_string(s));
  }
}

TEST_CASE("LG and GL coincide with identity stubs") {
  const T x = oracle::uniform(Shape{2, 4, 4, 8}, 5);
  auto lg = make_block(block_config(LocalMixer::kIdentity, CombineStrategy::kLocalGlobal));
  auto gl = make_block(block_config(LocalMixer::kIdentity, CombineStrategy::kGlobalLocal), 8, 4, 6);
  copy_shared(*lg, *gl);
  for (auto* b : {lg.get(), gl.get()}) {
    auto& g = b->global();
    g.row_mixer().value.setIdentity();
    g.column_mixer().value.setIdentity();
    g.row_bias().value.setZero();
    g.column_bias().value.setZero();
    for (int k = 0; k < 3; ++k) g.fuse().weight().value.middleRows(8 * k, 8) = M::Identity(8, 8) / 3.0;
    g.fuse().bias().value.setZero();
  }
  CHECK(oracle::rel_error(lg->forward(x, Mode::kTrain), gl->forward(x, Mode::kTrain)) < 1e-10);
}

TEST_CASE("identity and spc mixers differ around a one-hot pillar") {
  T x = T::constant(Shape{1, 6, 6, 8}, 0.0);
  x(0, 2, 3, 1) = 1.0;
  auto spc = make_block(block_config(LocalMixer::kSpc, CombineStrategy::kLocalGlobal), 8, 6);
  auto id = make_block(block_config(LocalMixer::kIdentity, CombineStrategy::kLocalGlobal), 8, 6, 7);
  copy_shared(*spc, *id);
  const T a = spc->forward(x, Mode::kTrain);
  const T b = id->forward(x, Mode::kTrain);
  for (auto [i, j] : {std::pair<Index, Index>{1, 3}, {3, 3}, {2, 2}, {2, 4}})
    CHECK((a.pillars().row(x.row(0, i, j)) - b.pillars().row(x.row(0, i, j))).cwiseAbs().maxCoeff() > 1e-9);
}

TEST_CASE("block gradient checks on [1,4,4,8]") {
  const T x = oracle::uniform(Shape{1, 4, 4, 8}, 8);
  for (LocalMixer m : {LocalMixer::kSpc, LocalMixer::kDwConv}) {
    auto b = make_block(block_config(m, CombineStrategy::kLocalGlobal));
    randomize(*b, 50);
    CHECK_MESSAGE(finite_diff_check(*b, x).max_relative_error < 1e-4, to_string(m));
  }
}

TEST_CASE("block names and config parsing") {
  CHECK(parse_combine("concat_reduce") == CombineStrategy::kConcatReduce);
  CHECK(parse_local_mixer("dwconv") == LocalMixer::kDwConv);
  CHECK_THROWS_AS(parse_combine("zigzag"), ConfigError);
  CHECK_THROWS_AS(parse_local_mixer("conv5"), ConfigError);
  auto b = make_block(block_config(LocalMixer::kSpc, CombineStrategy::kLocalGlobal));
  std::map<std::string, int> seen;
  for (auto* p : b->parameters()) ++seen[p->name];
  for (const auto& [name, count] : seen) CHECK_MESSAGE(count == 1, name);
  CHECK(seen.count("block.spc.fuse.w") == 1);
  CHECK_THROWS_AS(b->forward(T(Shape{1, 4, 5, 8}), Mode::kTrain), DimensionError);
}
