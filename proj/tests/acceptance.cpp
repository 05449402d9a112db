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

// Acceptance suite: one [PASS]/[FAIL] line per criterion, nonzero exit on any failure.

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>

#include "caterpillar/bench.hpp"
#include "caterpillar/blocks.hpp"
#include "caterpillar/checkpoint.hpp"
#include "caterpillar/data.hpp"
#include "caterpillar/grad_suite.hpp"
#include "caterpillar/train.hpp"
#include "oracles.hpp"

using namespace caterpillar;
using T = Tensor<double>;
using M = Matrix<double>;

namespace {

struct Outcome {
  bool pass = true;
  std::string details;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

bool within(double value, double target, double tol) { return std::abs(value - target) <= tol * target; }

constexpr PaddingMode kPads[] = {PaddingMode::kZero, PaddingMode::kReplicate, PaddingMode::kCircular,
                                 PaddingMode::kReflect};
constexpr MixingWay kMixes[] = {MixingWay::kReduceConcatFuse, MixingWay::kReduceConcat, MixingWay::kConcatFuse,
                                MixingWay::kSumFuse, MixingWay::kSum};

SpcConfig config(int nd, Index steps, PaddingMode pad, MixingWay mix) {
  SpcConfig cfg;
  cfg.directions = SpcConfig::preset(nd);
  cfg.steps = steps;
  cfg.padding = pad;
  cfg.mixing = mix;
  return cfg;
}

/// Map side in [2s+1, 6] (at least 3): reflect padding needs more than 2s rows/cols.
Index extent(oracle::Mt64& gen, Index steps) {
  const Index lo = std::max<Index>(3, 2 * steps + 1);
  return lo + static_cast<Index>(gen.next() % static_cast<std::uint64_t>(7 - lo));
}

void randomize(Layer<double>& layer, std::uint64_t seed) {
  for (auto* p : layer.parameters()) p->value = oracle::uniform_matrix(p->value.rows(), p->value.cols(), seed++);
}

Outcome oracle_grid() {
  const auto start = std::chrono::steady_clock::now();
  oracle::Mt64 gen(2024);
  int cases = 0;
  double worst = 0;
  for (int nd : {4, 5, 8, 9})
    for (Index s : {0, 1, 2})
      for (PaddingMode pad : kPads)
        for (MixingWay mix : kMixes) {
          const SpcConfig cfg = config(nd, s, pad, mix);
          // Reduce modes split C into N_D equal parts: 5 and 9 directions use C = N_D,
          // 4 and 8 directions use a multiple of N_D up to 8.
          Index c = 1 + static_cast<Index>(gen.next() % 8);
          if (uses_reduce(mix)) c = nd % 4 != 0 ? nd : (nd == 4 && gen.next() % 2 ? 4 : 8);
          const Index n = 1 + static_cast<Index>(gen.next() % 2);
          const Index h = extent(gen, s), w = extent(gen, s);
          const std::uint64_t seed = gen.next();
          for (bool bias : {false, true}) {
            Rng rng(seed);
            Spc<double> spc("spc", cfg, c, bias, rng);
            randomize(spc, seed);
            const T x = oracle::uniform(Shape{n, h, w, c}, seed + 99);
            worst = std::max(worst, oracle::rel_error(spc.forward(x, Mode::kEval), oracle::spc(x, spc)));
            ++cases;
          }
        }
  const double total = seconds_since(start);
  Outcome o;
  o.pass = cases >= 200 && worst < 1e-12 && total < 60;
  o.details = std::to_string(cases) + " cases over 240 configurations, max rel error " + fmt("%.3g", worst) + ", " +
              fmt("%.2f", total) + " s";
  return o;
}

Outcome gradient_suite() {
  const auto start = std::chrono::steady_clock::now();
  const auto cases = run_grad_suite(GradSuiteOptions{});
  const double secs = seconds_since(start);
  int passed = 0;
  std::string first_failure;
  for (const auto& c : cases) {
    const double limit = c.target == "linear" ? 1e-8 : 1e-4;
    const bool ok = c.passed && c.max_relative_error < limit && c.tolerance <= limit;
    passed += ok;
    if (!ok && first_failure.empty()) first_failure = " first failure " + c.target + " " + c.config;
  }
  Outcome o;
  o.pass = !cases.empty() && passed == static_cast<int>(cases.size()) && secs < 300;
  o.details = std::to_string(passed) + "/" + std::to_string(cases.size()) + " checks passed, " + fmt("%.2f", secs) +
              " s" + first_failure;
  return o;
}

Outcome local_mixer_accounting() {
  Outcome o;
  std::string bad;
  for (Index d : {8, 16, 64, 80, 96, 512}) {
    const auto conv = local_mixer_param_count(d, d, MixerKind::kConv);
    const auto spc = local_mixer_param_count(d, d, MixerKind::kSpc);
    if (conv != 9 * d * d || spc != 2 * d * d || conv * 2 != spc * 9) bad += " d=" + std::to_string(d);
    Rng rng(static_cast<std::uint64_t>(d));
    Spc<double> layer("spc", SpcConfig{}, d, false, rng);
    if (count_params(layer) != spc) bad += " enumerated d=" + std::to_string(d);
  }
  const double ratio = static_cast<double>(local_mixer_param_count(80, 80, MixerKind::kConv)) /
                       static_cast<double>(local_mixer_param_count(80, 80, MixerKind::kSpc));
  Rng rng(80);
  Spc<double> spc80("spc", SpcConfig{}, 80, false, rng);
  o.pass = bad.empty() && ratio == 4.5;
  o.details = "d=80: conv=" + std::to_string(local_mixer_param_count(80, 80, MixerKind::kConv)) +
              " spc=" + std::to_string(local_mixer_param_count(80, 80, MixerKind::kSpc)) +
              " enumerated=" + std::to_string(count_params(spc80)) + " ratio=" + fmt("%g", ratio) + bad;
  return o;
}

Outcome model_accounting() {
  auto t = build_caterpillar<float>(ModelSpec::caterpillar("T"));
  auto mi = build_caterpillar<float>(ModelSpec::caterpillar("Mi"));
  auto rs = build_resnet18<float>(64, ResNetMixer::kSpc, 10, 32, true);
  auto rc = build_resnet18<float>(64, ResNetMixer::kConv3x3, 1000, 224, false);
  const auto ct = estimate_cost(*t, t->input_shape(1));
  const auto cm = estimate_cost(*mi, mi->input_shape(1));
  const double tp = static_cast<double>(ct.params), tm = static_cast<double>(ct.macs);
  const double mp = static_cast<double>(cm.params), mm = static_cast<double>(cm.macs);
  const double rsp = static_cast<double>(count_params(*rs)), rcp = static_cast<double>(count_params(*rc));
  Outcome o;
  o.pass = within(tp, 29e6, 0.10) && within(tm, 6.0e9, 0.15) && within(mp, 6e6, 0.10) && within(mm, 1.2e9, 0.15) &&
           within(rsp, 2.6e6, 0.15) && within(rcp, 12e6, 0.10);
  o.details = "T " + fmt("%.2fM", tp / 1e6) + " " + fmt("%.3fG", tm / 1e9) + "; Mi " + fmt("%.2fM", mp / 1e6) + " " +
              fmt("%.3fG", mm / 1e9) + "; Res-18(SPC) " + fmt("%.2fM", rsp / 1e6) + "; Res-18 " +
              fmt("%.2fM", rcp / 1e6);
  return o;
}

Outcome local_mixer_delta() {
  std::vector<std::int64_t> deltas;
  for (Index ratio : {2, 3, 4}) {
    ModelSpec spec = ModelSpec::caterpillar("T");
    spec.block.ffn_ratio = ratio;
    ModelSpec dw = spec;
    dw.block.local_mixer = LocalMixer::kDwConv;
    dw.block.dwconv_kernel = 3;
    deltas.push_back(count_params(*build_caterpillar<float>(spec)) - count_params(*build_caterpillar<float>(dw)));
  }
  Outcome o;
  const double d = static_cast<double>(deltas[0]);
  o.pass = d >= 4.5e6 && d <= 5.3e6 && deltas[1] == deltas[0] && deltas[2] == deltas[0];
  o.details = "delta at ffn_ratio 2/3/4: " + std::to_string(deltas[0]) + "/" + std::to_string(deltas[1]) + "/" +
              std::to_string(deltas[2]);
  return o;
}

/// sum_d map_d (R_d F_d) + (sum_d b_d F_d + b_F), with F_d the rows of the fuse matrix fed by branch d.
M composed(const std::vector<T>& maps, Spc<double>& spc) {
  const Index part = spc.reduce(0).weight().value.cols();
  Linear<double>& fuse = *spc.fuse();
  M y = M::Zero(maps[0].pillars().rows(), spc.out_channels());
  M bias = fuse.has_bias() ? M(fuse.bias().value) : M::Zero(1, spc.out_channels());
  for (Index d = 0; d < spc.reduce_count(); ++d) {
    const M block = fuse.weight().value.middleRows(d * part, part);
    y += maps[static_cast<std::size_t>(d)].pillars() * (spc.reduce(d).weight().value * block);
    if (spc.reduce(d).has_bias()) bias += spc.reduce(d).bias().value * block;
  }
  y.rowwise() += bias.row(0);
  return y;
}

Outcome structured_convolution() {
  oracle::Mt64 gen(6);
  double worst = 0;
  const int cases = 50;
  for (int k = 0; k < cases; ++k) {
    const int nd = (gen.next() % 2) ? 8 : 4;
    const Index c = nd * (1 + static_cast<Index>(gen.next() % 2));
    const Index s = static_cast<Index>(gen.next() % 3);
    const Index h = extent(gen, s), w = extent(gen, s);
    const SpcConfig cfg = config(nd, s, kPads[gen.next() % 4], MixingWay::kReduceConcatFuse);
    const std::uint64_t seed = gen.next();
    Rng rng(seed);
    Spc<double> spc("spc", cfg, c, k % 2 == 0, rng);
    randomize(spc, seed);
    const T x = oracle::uniform(Shape{1 + k % 2, h, w, c}, seed + 3);
    const M want = composed(pillars_shift(x, cfg), spc);
    const M got = spc.forward(x, Mode::kEval).pillars();
    worst = std::max(worst, (got - want).cwiseAbs().maxCoeff() / want.cwiseAbs().maxCoeff());
  }
  Outcome o;
  o.pass = worst < 1e-10;
  o.details = std::to_string(cases) + " cases, max rel error " + fmt("%.3g", worst);
  return o;
}

Outcome translation_equivariance() {
  oracle::Mt64 gen(7);
  double worst = 0;
  int pillars = 0;
  for (int k = 0; k < 20; ++k) {
    const Index h = 8, w = 9, c = 8;
    const Index ty = static_cast<Index>(gen.next() % 5) - 2, tx = static_cast<Index>(gen.next() % 5) - 2;
    const std::uint64_t seed = gen.next();
    Rng rng(seed);
    Spc<double> spc("spc", config(4, 1, PaddingMode::kZero, MixingWay::kReduceConcatFuse), c, true, rng);
    randomize(spc, seed);
    const T x = oracle::uniform(Shape{1, h, w, c}, seed + 1);
    T moved(x.shape());
    for (Index i = 0; i < h; ++i)
      for (Index j = 0; j < w; ++j)
        moved.pillars().row(moved.row(0, i, j)) = x.pillars().row(x.row(0, ((i - ty) % h + h) % h, ((j - tx) % w + w) % w));
    const T y = spc.forward(x, Mode::kEval), ym = spc.forward(moved, Mode::kEval);
    auto interior = [&](Index i, Index j) { return i >= 2 && j >= 2 && i < h - 2 && j < w - 2; };
    for (Index i = 0; i < h; ++i)
      for (Index j = 0; j < w; ++j) {
        const Index si = i - ty, sj = j - tx;
        if (!interior(i, j) || !interior(si, sj)) continue;
        const auto a = ym.pillars().row(ym.row(0, i, j));
        const auto b = y.pillars().row(y.row(0, si, sj));
        worst = std::max(worst, (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff());
        ++pillars;
      }
  }
  Outcome o;
  o.pass = pillars > 0 && worst < 1e-12;
  o.details = std::to_string(pillars) + " interior pillars over 20 shifts, max rel error " + fmt("%.3g", worst);
  return o;
}

Outcome overfit() {
  ModelSpec spec;
  spec.variant = "custom";
  spec.base_width = 16;
  spec.channels = {16, 32, 64, 128};
  spec.depths = {1, 1, 1, 1};
  spec.patch_size = 1;
  spec.input_h = spec.input_w = 16;
  spec.num_classes = 8;
  const LabeledImages data = synth_blobs(1, 64, 16, 16, 3, 8);
  TrainConfig cfg;
  cfg.total_steps = 500;
  cfg.batch_size = 64;
  cfg.seed = 0;

  auto run = [&](double& acc, double& secs) {
    const auto start = std::chrono::steady_clock::now();
    auto model = build_caterpillar<float>(spec, 0);
    const TrainHistory h = train_loop(*model, data, cfg);
    acc = evaluate(*model, data);
    secs = seconds_since(start);
    return h.csv();
  };
  double acc1 = 0, acc2 = 0, s1 = 0, s2 = 0;
  const std::string a = run(acc1, s1);
  const std::string b = run(acc2, s2);
  Outcome o;
  o.pass = acc1 == 1.0 && s1 < 120 && a == b;
  o.details = "train accuracy " + fmt("%.4f", acc1) + " after 500 steps in " + fmt("%.1f", s1) + " s; rerun " +
              (a == b ? "bit-identical" : "DIFFERS") + " (" + fmt("%.1f", s2) + " s)";
  return o;
}

Outcome ablation_grid() {
  const CombineStrategy strategies[] = {CombineStrategy::kLocalGlobal, CombineStrategy::kGlobalLocal,
                                        CombineStrategy::kTwoResidual, CombineStrategy::kSum,
                                        CombineStrategy::kWeightedSum, CombineStrategy::kConcatReduce};
  int built = 0, expected_rejections = 0;
  std::string bad;
  for (CombineStrategy strategy : strategies)
    for (LocalMixer mixer : {LocalMixer::kSpc, LocalMixer::kDwConv, LocalMixer::kIdentity}) {
      std::vector<SpcConfig> spcs{SpcConfig{}};
      if (mixer == LocalMixer::kSpc) {
        spcs.clear();
        for (int nd : {4, 5, 8, 9})
          for (MixingWay mix : kMixes) spcs.push_back(config(nd, 1, PaddingMode::kZero, mix));
      }
      for (const SpcConfig& spc : spcs) {
        BlockConfig cfg;
        cfg.combine = strategy;
        cfg.local_mixer = mixer;
        cfg.spc = spc;
        const bool divisible = !uses_reduce(spc.mixing) || 8 % spc.direction_count() == 0;
        try {
          Rng rng(static_cast<std::uint64_t>(built));
          MixerBlock<double> block("block", cfg, 8, 8, 8, rng);
          const T x = oracle::uniform(Shape{1, 8, 8, 8}, 5);
          const T y = block.forward(x, Mode::kTrain);
          block.zero_grad();
          const T g = block.backward(oracle::uniform(y.shape(), 6));
          if (!divisible || !y.all_finite() || !g.all_finite() || g.shape() != x.shape()) bad += " " + spc.str();
          ++built;
        } catch (const ConfigError&) {
          // 5 or 9 directions cannot split 8 channels for the reduce modes.
          if (divisible) bad += " rejected " + spc.str();
          else ++expected_rejections;
        } catch (const std::exception& e) {
          bad += std::string(" ") + e.what();
        }
      }
    }
  Outcome o;
  o.pass = bad.empty() && built == 6 * 18 && expected_rejections == 6 * 4;
  o.details = std::to_string(built) + " block configurations ran forward+backward, " +
              std::to_string(expected_rejections) + " non-divisible reduce configurations rejected as config errors" +
              bad;
  return o;
}

void put_be32(std::string& s, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) s.push_back(static_cast<char>((v >> shift) & 0xFF));
}

Outcome format_fidelity() {
  std::string bad;
  // Handcrafted CIFAR-10 record: label, then R, G, B planes of 32x32.
  std::string rec(3073, '\0');
  rec[0] = 3;
  rec[1 + 5] = static_cast<char>(200);
  rec[1 + 1024 + 32 * 2 + 7] = static_cast<char>(17);
  rec[1 + 2048 + 1023] = static_cast<char>(255);
  const auto c = parse_cifar10_binary(rec);
  if (c.labels != std::vector<int>{3} || c.images(0, 0, 5, 0) != 200.0f / 255.0f ||
      c.images(0, 2, 7, 1) != 17.0f / 255.0f || c.images(0, 31, 31, 2) != 1.0f || c.images(0, 0, 0, 0) != 0.0f)
    bad += " cifar-record";
  std::string many;
  for (int k = 0; k < 4; ++k) {
    std::string r(3073, '\0');
    r[0] = static_cast<char>(k * 3 % 10);
    for (std::size_t i = 1; i < r.size(); ++i) r[i] = static_cast<char>((i * 13 + k * 7) % 256);
    many += r;
  }
  if (write_cifar10_binary(parse_cifar10_binary(many)) != many) bad += " cifar-roundtrip";

  // Handcrafted IDX pair: 2 images of 2x3.
  std::string img, lbl;
  put_be32(img, 0x803);
  put_be32(img, 2);
  put_be32(img, 2);
  put_be32(img, 3);
  for (int k = 0; k < 12; ++k) img.push_back(static_cast<char>(k * 21));
  put_be32(lbl, 0x801);
  put_be32(lbl, 2);
  lbl.push_back(7);
  lbl.push_back(1);
  const auto d = parse_idx(img, lbl);
  if (d.labels != std::vector<int>{7, 1} || d.images.shape() != Shape{2, 2, 3, 1} ||
      d.images(1, 1, 2, 0) != 231.0f / 255.0f || d.images(0, 0, 1, 0) != 21.0f / 255.0f)
    bad += " idx-record";
  const auto [img2, lbl2] = write_idx(d);
  if (img2 != img || lbl2 != lbl) bad += " idx-roundtrip";

  // Checkpoint after a short training run, so buffers and weights have moved.
  ModelSpec spec;
  spec.variant = "custom";
  spec.base_width = 8;
  spec.channels = {8, 16, 32, 64};
  spec.depths = {1, 1, 1, 1};
  spec.patch_size = 1;
  spec.input_h = spec.input_w = 16;
  spec.num_classes = 4;
  auto model = build_caterpillar<float>(spec, 9);
  TrainConfig cfg;
  cfg.total_steps = 2;
  cfg.batch_size = 8;
  train_loop(*model, synth_blobs(3, 8, 16, 16, 3, 4), cfg);
  const std::string path = (std::filesystem::temp_directory_path() / "caterpillar_acceptance.ckpt").string();
  save_checkpoint(*model, path);
  auto back = load_checkpoint<float>(path);
  const auto a = model->parameters(), b = back->parameters();
  std::int64_t compared = 0;
  if (a.size() != b.size()) bad += " ckpt-count";
  for (std::size_t k = 0; k < std::min(a.size(), b.size()); ++k) {
    if (a[k]->name != b[k]->name || a[k]->size() != b[k]->size()) {
      bad += " ckpt-" + a[k]->name;
      continue;
    }
    for (Index i = 0; i < a[k]->size(); ++i, ++compared)
      if (std::bit_cast<std::uint32_t>(a[k]->value.data()[i]) != std::bit_cast<std::uint32_t>(b[k]->value.data()[i]))
        bad += " ckpt-value";
  }
  std::ostringstream again;
  write_checkpoint(make_checkpoint(*back), again);
  if (again.str() != read_file(path)) bad += " ckpt-bytes";
  std::filesystem::remove(path);

  Outcome o;
  o.pass = bad.empty();
  o.details = "CIFAR-10 and IDX records and round-trips, checkpoint " + std::to_string(compared) +
              " values bit-exact" + bad;
  return o;
}

Outcome bench_sanity() {
  BenchOptions opt;
  opt.channels = 16;
  opt.hw = 8;
  opt.batch = 2;
  opt.reps = 2;
  opt.warmup = 1;
  const BenchReport report = run_bench(opt);
  std::string bad, seen;
  for (BenchOp op : opt.ops) {
    const auto analytic = analytic_macs(op, opt.channels, opt.hw, opt.hw, opt.batch, opt.spc);
    const auto estimate = estimated_macs(op, opt);
    if (analytic != estimate) bad += " " + std::string(to_string(op)) + " mismatch";
    int rows = 0;
    for (const auto& r : report.rows)
      if (r.op == to_string(op)) {
        ++rows;
        if (r.analytic_macs != analytic) bad += " row-" + r.op;
      }
    if (rows != 1) bad += " rows-" + std::string(to_string(op));
    seen += std::string(seen.empty() ? "" : ",") + std::string(to_string(op)) + "=" + std::to_string(analytic);
  }
  Outcome o;
  o.pass = bad.empty() && report.rows.size() == 3;
  o.details = "analytic == estimated MACs (" + seen + "), " + std::to_string(report.rows.size()) + " rows" + bad;
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"spc oracle equivalence", oracle_grid},
      {"gradient suite", gradient_suite},
      {"local mixer accounting", local_mixer_accounting},
      {"model accounting", model_accounting},
      {"local mixer delta", local_mixer_delta},
      {"structured convolution equivalence", structured_convolution},
      {"translation equivariance", translation_equivariance},
      {"micro overfit", overfit},
      {"ablation grid", ablation_grid},
      {"format fidelity", format_fidelity},
      {"bench sanity", bench_sanity},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("[%s] %zu %s: %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(), o.details.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failures), criteria.size());
  return failures == 0 ? 0 : 1;
}
