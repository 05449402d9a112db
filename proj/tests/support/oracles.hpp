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

// Brute-force reference implementations for the test suites. Everything here
// is written with scalar loops over the public tensor accessors and shares no
// code with the library kernels it checks.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "caterpillar/smlp.hpp"
#include "caterpillar/spc.hpp"
#include "caterpillar/tensor.hpp"

namespace oracle {

using caterpillar::Index;
using caterpillar::Shape;
using T = caterpillar::Tensor<double>;
using M = caterpillar::Matrix<double>;

/// MT19937-64 written out from the published algorithm.
class Mt64 {
 public:
  explicit Mt64(std::uint64_t seed) {
    mt_[0] = seed;
    for (int i = 1; i < 312; ++i) mt_[i] = 6364136223846793005ULL * (mt_[i - 1] ^ (mt_[i - 1] >> 62)) + i;
  }

  std::uint64_t next() {
    constexpr std::uint64_t upper = 0xFFFFFFFF80000000ULL;
    constexpr std::uint64_t lower = 0x7FFFFFFFULL;
    if (i_ >= 312) {
      for (int k = 0; k < 312; ++k) {
        const std::uint64_t x = (mt_[k] & upper) | (mt_[(k + 1) % 312] & lower);
        std::uint64_t xa = x >> 1;
        if (x & 1) xa ^= 0xB5026F5AA96619E9ULL;
        mt_[k] = mt_[(k + 156) % 312] ^ xa;
      }
      i_ = 0;
    }
    std::uint64_t x = mt_[i_++];
    x ^= (x >> 29) & 0x5555555555555555ULL;
    x ^= (x << 17) & 0x71D67FFFEDA60000ULL;
    x ^= (x << 37) & 0xFFF7EEE000000000ULL;
    x ^= x >> 43;
    return x;
  }

 private:
  std::array<std::uint64_t, 312> mt_{};
  int i_ = 312;
};

/// Maclaurin series of erf, summed in long double.
inline double erf_series(double x) {
  long double term = x;  // (-1)^n x^(2n+1) / n!
  long double sum = 0;
  const long double x2 = static_cast<long double>(x) * x;
  for (int n = 0; n < 200; ++n) {
    const long double add = term / (2 * n + 1);
    sum += add;
    if (std::fabs(static_cast<double>(add)) < 1e-30) break;
    term *= -x2 / (n + 1);
  }
  return static_cast<double>(sum * 2 / std::sqrt(3.14159265358979323846264338327950288L));
}

inline double max_abs(const M& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

/// max |a - b| / max |b|, or the absolute difference when b is all zeros.
inline double rel_error(const M& a, const M& b) {
  const double diff = max_abs(a - b);
  const double scale = max_abs(b);
  return scale > 0 ? diff / scale : diff;
}
inline double rel_error(const T& a, const T& b) { return rel_error(a.pillars(), b.pillars()); }

inline T project(const T& x, const M& w, const M* bias) {
  T out(Shape{x.n(), x.h(), x.w(), w.cols()});
  for (Index n = 0; n < x.n(); ++n)
    for (Index i = 0; i < x.h(); ++i)
      for (Index j = 0; j < x.w(); ++j)
        for (Index o = 0; o < w.cols(); ++o) {
          double acc = bias ? (*bias)(0, o) : 0.0;
          for (Index c = 0; c < x.c(); ++c) acc += x(n, i, j, c) * w(c, o);
          out(n, i, j, o) = acc;
        }
  return out;
}

/// Cross-correlation with a (k*k*Cin) x Cout kernel (row (dy*k + dx)*Cin + ci).
inline T conv(const T& x, const M& kernel, Index k, Index stride, Index pad, Index cout) {
  const Index oh = (x.h() + 2 * pad - k) / stride + 1;
  const Index ow = (x.w() + 2 * pad - k) / stride + 1;
  T out(Shape{x.n(), oh, ow, cout});
  for (Index n = 0; n < x.n(); ++n)
    for (Index i = 0; i < oh; ++i)
      for (Index j = 0; j < ow; ++j)
        for (Index o = 0; o < cout; ++o) {
          double acc = 0;
          for (Index dy = 0; dy < k; ++dy)
            for (Index dx = 0; dx < k; ++dx) {
              const Index r = i * stride + dy - pad;
              const Index c = j * stride + dx - pad;
              if (r < 0 || c < 0 || r >= x.h() || c >= x.w()) continue;
              for (Index ci = 0; ci < x.c(); ++ci) acc += x(n, r, c, ci) * kernel((dy * k + dx) * x.c() + ci, o);
            }
          out(n, i, j, o) = acc;
        }
  return out;
}

/// Depthwise same-padded convolution with a (k*k) x C kernel.
inline T dwconv(const T& x, const M& kernel, Index k) {
  T out(x.shape());
  const Index pad = k / 2;
  for (Index n = 0; n < x.n(); ++n)
    for (Index i = 0; i < x.h(); ++i)
      for (Index j = 0; j < x.w(); ++j)
        for (Index c = 0; c < x.c(); ++c) {
          double acc = 0;
          for (Index dy = 0; dy < k; ++dy)
            for (Index dx = 0; dx < k; ++dx) {
              const Index r = i + dy - pad;
              const Index col = j + dx - pad;
              if (r < 0 || col < 0 || r >= x.h() || col >= x.w()) continue;
              acc += x(n, r, col, c) * kernel(dy * k + dx, c);
            }
          out(n, i, j, c) = acc;
        }
  return out;
}

/// Row offset and column offset read by each direction at distance s.
inline std::array<Index, 2> offset(caterpillar::Direction d, Index s) {
  using caterpillar::Direction;
  switch (d) {
    case Direction::kUp: return {s, 0};
    case Direction::kDown: return {-s, 0};
    case Direction::kLeft: return {0, s};
    case Direction::kRight: return {0, -s};
    case Direction::kCenter: return {0, 0};
    case Direction::kUpLeft: return {s, s};
    case Direction::kUpRight: return {s, -s};
    case Direction::kDownLeft: return {-s, s};
    case Direction::kDownRight: return {-s, -s};
  }
  return {0, 0};
}

/// Source index along one axis for an out-of-frame read, or -1 for a zero.
inline Index resolve(Index idx, Index extent, caterpillar::PaddingMode mode) {
  using caterpillar::PaddingMode;
  if (idx >= 0 && idx < extent) return idx;
  switch (mode) {
    case PaddingMode::kZero: return -1;
    case PaddingMode::kReplicate: return idx < 0 ? 0 : extent - 1;
    case PaddingMode::kCircular: return ((idx % extent) + extent) % extent;
    case PaddingMode::kReflect: return idx < 0 ? -idx : 2 * (extent - 1) - idx;
  }
  return -1;
}

/// Neighbour value of pillar (i, j) in direction d.
inline double gather(const T& x, Index n, Index i, Index j, Index c, caterpillar::Direction d, Index s,
                     caterpillar::PaddingMode mode) {
  const auto off = offset(d, s);
  const Index r = resolve(i + off[0], x.h(), mode);
  const Index q = resolve(j + off[1], x.w(), mode);
  if (r < 0 || q < 0) return 0.0;
  return x(n, r, q, c);
}

inline std::vector<double> apply(const std::vector<double>& v, const M& w, const M* bias) {
  std::vector<double> out(static_cast<std::size_t>(w.cols()));
  for (Index o = 0; o < w.cols(); ++o) {
    double acc = bias ? (*bias)(0, o) : 0.0;
    for (Index c = 0; c < w.rows(); ++c) acc += v[static_cast<std::size_t>(c)] * w(c, o);
    out[static_cast<std::size_t>(o)] = acc;
  }
  return out;
}

/// Pillar-by-pillar SPC reference reading the reduce/fuse weights of `layer`.
inline T spc(const T& x, caterpillar::Spc<double>& layer) {
  using caterpillar::MixingWay;
  const auto& cfg = layer.config();
  const auto nd = cfg.directions.size();
  const Index cin = x.c();
  std::vector<const M*> rw, rb;
  for (Index d = 0; d < layer.reduce_count(); ++d) {
    rw.push_back(&layer.reduce(d).weight().value);
    rb.push_back(layer.reduce(d).has_bias() ? &layer.reduce(d).bias().value : nullptr);
  }
  const M* fw = layer.fuse() ? &layer.fuse()->weight().value : nullptr;
  const M* fb = layer.fuse() && layer.fuse()->has_bias() ? &layer.fuse()->bias().value : nullptr;

  const Index cout = layer.out_channels();
  T out(Shape{x.n(), x.h(), x.w(), cout});
  for (Index n = 0; n < x.n(); ++n)
    for (Index i = 0; i < x.h(); ++i)
      for (Index j = 0; j < x.w(); ++j) {
        std::vector<std::vector<double>> maps(nd, std::vector<double>(static_cast<std::size_t>(cin)));
        for (std::size_t d = 0; d < nd; ++d)
          for (Index c = 0; c < cin; ++c)
            maps[d][static_cast<std::size_t>(c)] = gather(x, n, i, j, c, cfg.directions[d], cfg.steps, cfg.padding);

        std::vector<double> mixed;
        switch (cfg.mixing) {
          case MixingWay::kReduceConcatFuse:
          case MixingWay::kReduceConcat:
            for (std::size_t d = 0; d < nd; ++d) {
              const auto part = apply(maps[d], *rw[d], rb[d]);
              mixed.insert(mixed.end(), part.begin(), part.end());
            }
            break;
          case MixingWay::kConcatFuse:
            for (std::size_t d = 0; d < nd; ++d) mixed.insert(mixed.end(), maps[d].begin(), maps[d].end());
            break;
          case MixingWay::kSumFuse:
          case MixingWay::kSum:
            mixed.assign(static_cast<std::size_t>(cin), 0.0);
            for (std::size_t d = 0; d < nd; ++d)
              for (Index c = 0; c < cin; ++c) mixed[static_cast<std::size_t>(c)] += maps[d][static_cast<std::size_t>(c)];
            break;
        }
        if (fw) mixed = apply(mixed, *fw, fb);
        for (Index o = 0; o < cout; ++o) out(n, i, j, o) = mixed[static_cast<std::size_t>(o)];
      }
  return out;
}

/// sMLP reference: out = fuse([row mix, column mix, x]).
inline T smlp(const T& x, caterpillar::Smlp<double>& layer) {
  const M& wh = layer.row_mixer().value;
  const M& wv = layer.column_mixer().value;
  const M* bh = layer.has_bias() ? &layer.row_bias().value : nullptr;
  const M* bv = layer.has_bias() ? &layer.column_bias().value : nullptr;
  const Index c3 = 3 * x.c();
  T cat(Shape{x.n(), x.h(), x.w(), c3});
  for (Index n = 0; n < x.n(); ++n)
    for (Index i = 0; i < x.h(); ++i)
      for (Index j = 0; j < x.w(); ++j)
        for (Index c = 0; c < x.c(); ++c) {
          double h = bh ? (*bh)(0, j) : 0.0;
          for (Index jj = 0; jj < x.w(); ++jj) h += wh(jj, j) * x(n, i, jj, c);
          double v = bv ? (*bv)(0, i) : 0.0;
          for (Index ii = 0; ii < x.h(); ++ii) v += wv(ii, i) * x(n, ii, j, c);
          cat(n, i, j, c) = h;
          cat(n, i, j, x.c() + c) = v;
          cat(n, i, j, 2 * x.c() + c) = x(n, i, j, c);
        }
  auto& fuse = layer.fuse();
  return project(cat, fuse.weight().value, fuse.has_bias() ? &fuse.bias().value : nullptr);
}

/// Scalar Adam/AdamW trace for a single parameter.
struct ScalarAdamW {
  double theta;
  double lr, wd, b1, b2, eps;
  double m = 0, v = 0;
  int t = 0;

  void step(double g) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mhat = m / (1 - std::pow(b1, t));
    const double vhat = v / (1 - std::pow(b2, t));
    theta -= lr * wd * theta;
    theta -= lr * mhat / (std::sqrt(vhat) + eps);
  }
};

/// Fills every entry of `t` from U(lo, hi) using a local generator.
inline T uniform(const Shape& shape, std::uint64_t seed, double lo = -1, double hi = 1) {
  Mt64 g(seed);
  T t(shape);
  for (Index k = 0; k < shape.size(); ++k)
    t.data()[k] = lo + (hi - lo) * static_cast<double>(g.next() >> 11) * 0x1.0p-53;
  return t;
}

inline M uniform_matrix(Index rows, Index cols, std::uint64_t seed, double lo = -1, double hi = 1) {
  Mt64 g(seed);
  M m(rows, cols);
  for (Index k = 0; k < m.size(); ++k) m.data()[k] = lo + (hi - lo) * static_cast<double>(g.next() >> 11) * 0x1.0p-53;
  return m;
}

}  // namespace oracle
