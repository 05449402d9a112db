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

#include "caterpillar/spc.hpp"

#include <algorithm>
#include <cstring>
#include <sstream>

namespace caterpillar {

namespace {

constexpr std::string_view kDirectionNames[] = {"up",      "down",     "left",      "right",     "center",
                                                "up-left", "up-right", "down-left", "down-right"};
constexpr std::string_view kPaddingNames[] = {"zero", "replicate", "circular", "reflect"};
constexpr std::string_view kMixingNames[] = {"reduce_concat_fuse", "reduce_concat", "concat_fuse", "sum_fuse",
                                             "sum"};

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view s, const std::string_view (&names)[N], const char* what) {
  for (std::size_t k = 0; k < N; ++k) {
    if (names[k] == s) return static_cast<Enum>(k);
  }
  throw ConfigError(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

// A tensor seen as [outer, extent, inner] along one spatial axis. Both axes are
// contiguous in NHWC: rows give (N, H, W*C), columns give (N*H, W, C).
enum class Axis { kRows, kCols };

struct AxisLayout {
  Index outer;
  Index extent;
  Index inner;
};

AxisLayout layout_of(const Shape& s, Axis a) {
  return a == Axis::kRows ? AxisLayout{s.n, s.h, s.w * s.c} : AxisLayout{s.n * s.h, s.w, s.c};
}

Shape with_extent(Shape s, Axis a, Index e) {
  (a == Axis::kRows ? s.h : s.w) = e;
  return s;
}

Index extent_of(const Shape& s, Axis a) { return a == Axis::kRows ? s.h : s.w; }

// Copies (or adds) `len` consecutive slabs starting at src_at into dst_at, for every outer slice.
template <typename Scalar>
void move_slabs(const Tensor<Scalar>& src, Axis axis, Index src_at, Tensor<Scalar>& dst, Index dst_at,
                Index len, bool accumulate) {
  if (len <= 0) return;
  const AxisLayout ls = layout_of(src.shape(), axis);
  const AxisLayout ld = layout_of(dst.shape(), axis);
  const Index block = len * ls.inner;
  for (Index o = 0; o < ls.outer; ++o) {
    const Scalar* from = src.data() + (o * ls.extent + src_at) * ls.inner;
    Scalar* to = dst.data() + (o * ld.extent + dst_at) * ld.inner;
    if (accumulate) {
      Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(to, block) +=
          Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(from, block);
    } else {
      std::memcpy(to, from, static_cast<std::size_t>(block) * sizeof(Scalar));
    }
  }
}

// One axis of a direction: shift reads towards higher indices (drop front, pad
// back) or towards lower indices (drop back, pad front).
struct AxisMove {
  Axis axis;
  bool drop_front;
};

std::vector<AxisMove> axis_moves(Direction d) {
  const Offset o = direction_offset(d, 1);
  std::vector<AxisMove> moves;
  if (o.dy != 0) moves.push_back({Axis::kRows, o.dy > 0});
  if (o.dx != 0) moves.push_back({Axis::kCols, o.dx > 0});
  return moves;
}

void check_shift(const Shape& s, Direction d, Index steps, PaddingMode mode) {
  if (steps == 0) return;
  for (const AxisMove& m : axis_moves(d)) {
    const Index e = extent_of(s, m.axis);
    const char* axis = m.axis == Axis::kRows ? "H" : "W";
    if (steps >= e) {
      throw ShiftRangeError("shift " + std::string(to_string(d)) + " by " + std::to_string(steps) +
                            " leaves nothing of extent " + axis + "=" + std::to_string(e));
    }
    if (mode == PaddingMode::kReflect && steps >= e - steps) {
      throw ReflectRangeError("reflect padding of " + std::to_string(steps) + " needs a remaining " + axis +
                              " extent > " + std::to_string(steps) + ", got " + std::to_string(e - steps));
    }
  }
}

template <typename Scalar>
Tensor<Scalar> drop_axis(const Tensor<Scalar>& x, const AxisMove& m, Index s) {
  const Index e = extent_of(x.shape(), m.axis);
  Tensor<Scalar> out(with_extent(x.shape(), m.axis, e - s));
  move_slabs(x, m.axis, m.drop_front ? s : 0, out, 0, e - s, false);
  return out;
}

template <typename Scalar>
void drop_axis_adjoint(const Tensor<Scalar>& g, const AxisMove& m, Index s, Tensor<Scalar>& dx) {
  const Index kept = extent_of(g.shape(), m.axis);
  move_slabs(g, m.axis, 0, dx, m.drop_front ? s : 0, kept, true);
}

// Pads a shrunk map back to full extent. Dropping the front means the vacated
// side is the back, and vice versa.
template <typename Scalar>
Tensor<Scalar> pad_axis(const Tensor<Scalar>& shrunk, const AxisMove& m, Index s, PaddingMode mode,
                        const Tensor<Scalar>* source) {
  const Index kept = extent_of(shrunk.shape(), m.axis);
  const Index full = kept + s;
  Tensor<Scalar> out(with_extent(shrunk.shape(), m.axis, full));
  const Index body = m.drop_front ? 0 : s;
  move_slabs(shrunk, m.axis, 0, out, body, kept, false);
  for (Index k = 0; k < s; ++k) {
    const Index at = m.drop_front ? kept + k : k;
    switch (mode) {
      case PaddingMode::kZero:
        break;
      case PaddingMode::kReplicate:
        move_slabs(shrunk, m.axis, m.drop_front ? kept - 1 : 0, out, at, 1, false);
        break;
      case PaddingMode::kCircular:
        move_slabs(*source, m.axis, m.drop_front ? k : full - s + k, out, at, 1, false);
        break;
      case PaddingMode::kReflect:
        move_slabs(shrunk, m.axis, m.drop_front ? kept - 2 - k : s - k, out, at, 1, false);
        break;
    }
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> pad_axis_adjoint(const Tensor<Scalar>& g, const AxisMove& m, Index s, PaddingMode mode,
                                Tensor<Scalar>& dsource) {
  const Index full = extent_of(g.shape(), m.axis);
  const Index kept = full - s;
  Tensor<Scalar> gs(with_extent(g.shape(), m.axis, kept));
  move_slabs(g, m.axis, m.drop_front ? 0 : s, gs, 0, kept, false);
  for (Index k = 0; k < s; ++k) {
    const Index at = m.drop_front ? kept + k : k;
    switch (mode) {
      case PaddingMode::kZero:
        break;
      case PaddingMode::kReplicate:
        move_slabs(g, m.axis, at, gs, m.drop_front ? kept - 1 : 0, 1, true);
        break;
      case PaddingMode::kCircular:
        move_slabs(g, m.axis, at, dsource, m.drop_front ? k : full - s + k, 1, true);
        break;
      case PaddingMode::kReflect:
        move_slabs(g, m.axis, at, gs, m.drop_front ? kept - 2 - k : s - k, 1, true);
        break;
    }
  }
  return gs;
}

// Shift then pad along one axis; the identity roll for circular padding.
template <typename Scalar>
Tensor<Scalar> shift_pad_axis(const Tensor<Scalar>& x, const AxisMove& m, Index s, PaddingMode mode) {
  return pad_axis(drop_axis(x, m, s), m, s, mode, &x);
}

template <typename Scalar>
Tensor<Scalar> shift_pad_axis_adjoint(const Tensor<Scalar>& g, const AxisMove& m, Index s, PaddingMode mode) {
  Tensor<Scalar> dx(g.shape());
  const Tensor<Scalar> gs = pad_axis_adjoint(g, m, s, mode, dx);
  drop_axis_adjoint(gs, m, s, dx);
  return dx;
}

}  // namespace

std::string_view to_string(Direction d) { return kDirectionNames[static_cast<int>(d)]; }
std::string_view to_string(PaddingMode m) { return kPaddingNames[static_cast<int>(m)]; }
std::string_view to_string(MixingWay m) { return kMixingNames[static_cast<int>(m)]; }
Direction parse_direction(std::string_view s) { return parse_enum<Direction>(s, kDirectionNames, "direction"); }
PaddingMode parse_padding(std::string_view s) { return parse_enum<PaddingMode>(s, kPaddingNames, "padding"); }
MixingWay parse_mixing(std::string_view s) { return parse_enum<MixingWay>(s, kMixingNames, "mixing way"); }

Offset direction_offset(Direction d, Index s) {
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
  return {};
}

bool uses_reduce(MixingWay m) { return m == MixingWay::kReduceConcatFuse || m == MixingWay::kReduceConcat; }

bool uses_fuse(MixingWay m) {
  return m == MixingWay::kReduceConcatFuse || m == MixingWay::kConcatFuse || m == MixingWay::kSumFuse;
}

std::vector<Direction> SpcConfig::preset(int count) {
  using D = Direction;
  const std::vector<D> four = {D::kUp, D::kDown, D::kLeft, D::kRight};
  const std::vector<D> diagonals = {D::kUpLeft, D::kUpRight, D::kDownLeft, D::kDownRight};
  std::vector<D> out = four;
  switch (count) {
    case 4:
      return out;
    case 5:
      out.push_back(D::kCenter);
      return out;
    case 8:
      out.insert(out.end(), diagonals.begin(), diagonals.end());
      return out;
    case 9:
      out.push_back(D::kCenter);
      out.insert(out.end(), diagonals.begin(), diagonals.end());
      return out;
    default:
      throw ConfigError("no direction preset with " + std::to_string(count) + " directions (use 4, 5, 8 or 9)");
  }
}

void SpcConfig::validate(Index channels) const {
  if (directions.empty()) throw ConfigError("spc: direction set is empty");
  for (std::size_t a = 0; a < directions.size(); ++a)
    for (std::size_t b = a + 1; b < directions.size(); ++b)
      if (directions[a] == directions[b]) {
        throw ConfigError("spc: direction '" + std::string(to_string(directions[a])) + "' listed twice");
      }
  if (steps < 0) throw ConfigError("spc: steps must be >= 0");
  if (uses_reduce(mixing) && channels % direction_count() != 0) {
    throw ConfigError("spc: " + std::string(to_string(mixing)) + " needs C divisible by N_D, got C=" +
                      std::to_string(channels) + " N_D=" + std::to_string(direction_count()));
  }
}

std::string SpcConfig::str() const {
  std::ostringstream os;
  os << "directions=";
  bool is_preset = false;
  for (int count : {4, 5, 8, 9}) {
    if (directions == preset(count)) {
      os << count;
      is_preset = true;
      break;
    }
  }
  if (!is_preset) {
    for (std::size_t k = 0; k < directions.size(); ++k) os << (k ? "," : "") << to_string(directions[k]);
  }
  os << " steps=" << steps << " padding=" << to_string(padding) << " mixing=" << to_string(mixing);
  return os.str();
}

SpcConfig SpcConfig::parse(std::string_view text) { return parse(text, SpcConfig{}); }

SpcConfig SpcConfig::parse(std::string_view text, const SpcConfig& base) {
  SpcConfig cfg = base;
  std::string normalized(text);
  std::replace(normalized.begin(), normalized.end(), ';', ' ');
  std::istringstream is(normalized);
  std::string token;
  while (is >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw ConfigError("spc config: expected key=value, got '" + token + "'");
    const std::string key = token.substr(0, eq);
    const std::string value = token.substr(eq + 1);
    if (key == "directions") {
      if (!value.empty() && std::all_of(value.begin(), value.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        cfg.directions = preset(std::stoi(value));
      } else {
        cfg.directions.clear();
        std::istringstream list(value);
        std::string name;
        while (std::getline(list, name, ',')) cfg.directions.push_back(parse_direction(name));
      }
    } else if (key == "steps") {
      try {
        cfg.steps = std::stoll(value);
      } catch (const std::exception&) {
        throw ConfigError("spc config: steps must be an integer, got '" + value + "'");
      }
    } else if (key == "padding") {
      cfg.padding = parse_padding(value);
    } else if (key == "mixing") {
      cfg.mixing = parse_mixing(value);
    } else {
      throw ConfigError("spc config: unknown key '" + key + "'");
    }
  }
  return cfg;
}

// ---------------------------------------------------------------- shift / pad

template <typename Scalar>
Tensor<Scalar> shift2d(const Tensor<Scalar>& x, Direction dir, Index steps) {
  if (steps < 0) throw ShiftRangeError("shift2d: negative steps");
  check_shift(x.shape(), dir, steps, PaddingMode::kZero);
  Tensor<Scalar> t = x;
  if (steps == 0) return t;
  for (const AxisMove& m : axis_moves(dir)) t = drop_axis(t, m, steps);
  return t;
}

template <typename Scalar>
Tensor<Scalar> pad2d(const Tensor<Scalar>& shrunk, Direction dir, Index steps, PaddingMode mode,
                     const Tensor<Scalar>& source) {
  const std::vector<AxisMove> moves = axis_moves(dir);
  Shape expected = source.shape();
  for (const AxisMove& m : moves) expected = with_extent(expected, m.axis, extent_of(expected, m.axis) - steps);
  if (!(shrunk.shape() == expected)) {
    throw DimensionError("pad2d: shrunk map " + shrunk.shape().str() + " does not match source " +
                         source.shape().str() + " shifted by " + std::to_string(steps));
  }
  check_shift(source.shape(), dir, steps, mode);
  if (steps == 0 || moves.empty()) return shrunk;
  if (moves.size() == 1) return pad_axis(shrunk, moves[0], steps, mode, &source);
  // Diagonal: rows then columns. The column wrap reads the row-rolled source.
  const Tensor<Scalar> row_source = drop_axis(source, moves[1], steps);
  const Tensor<Scalar> rows_padded = pad_axis(shrunk, moves[0], steps, mode, &row_source);
  const Tensor<Scalar> col_source = shift_pad_axis(source, moves[0], steps, mode);
  return pad_axis(rows_padded, moves[1], steps, mode, &col_source);
}

template <typename Scalar>
std::vector<Tensor<Scalar>> pillars_shift(const Tensor<Scalar>& x, const SpcConfig& cfg) {
  std::vector<Tensor<Scalar>> maps;
  maps.reserve(cfg.directions.size());
  for (Direction d : cfg.directions) {
    check_shift(x.shape(), d, cfg.steps, cfg.padding);
    Tensor<Scalar> t = x;
    if (cfg.steps > 0) {
      for (const AxisMove& m : axis_moves(d)) t = shift_pad_axis(t, m, cfg.steps, cfg.padding);
    }
    maps.push_back(std::move(t));
  }
  return maps;
}

template <typename Scalar>
Tensor<Scalar> pillars_shift_backward(const std::vector<Tensor<Scalar>>& grad_maps, const SpcConfig& cfg) {
  if (grad_maps.size() != cfg.directions.size()) {
    throw DimensionError("pillars_shift_backward: " + std::to_string(grad_maps.size()) + " maps for " +
                         std::to_string(cfg.directions.size()) + " directions");
  }
  Tensor<Scalar> dx(grad_maps.front().shape());
  for (std::size_t k = 0; k < grad_maps.size(); ++k) {
    Tensor<Scalar> g = grad_maps[k];
    if (cfg.steps > 0) {
      const std::vector<AxisMove> moves = axis_moves(cfg.directions[k]);
      for (auto it = moves.rbegin(); it != moves.rend(); ++it) {
        g = shift_pad_axis_adjoint(g, *it, cfg.steps, cfg.padding);
      }
    }
    dx += g;
  }
  return dx;
}

// ---------------------------------------------------------------- Spc layer

template <typename Scalar>
Spc<Scalar>::Spc(std::string name, SpcConfig cfg, Index channels, Index out_channels, bool bias, Rng& rng)
    : Layer<Scalar>(std::move(name)), cfg_(std::move(cfg)), in_(channels), out_(out_channels) {
  cfg_.validate(channels);
  if (!uses_fuse(cfg_.mixing) && out_channels != channels) {
    throw ConfigError(this->name_ + ": mixing " + std::string(to_string(cfg_.mixing)) +
                      " has no fuse projection, so C_out must equal C_in");
  }
  const Index nd = cfg_.direction_count();
  if (uses_reduce(cfg_.mixing)) {
    for (Direction d : cfg_.directions) {
      reduce_.push_back(std::make_unique<Linear<Scalar>>(
          scoped(this->name_, "reduce." + std::string(to_string(d))), channels, channels / nd, bias, rng));
    }
  }
  if (uses_fuse(cfg_.mixing)) {
    const Index fuse_in = cfg_.mixing == MixingWay::kConcatFuse ? nd * channels : channels;
    fuse_.emplace(scoped(this->name_, "fuse"), fuse_in, out_channels, bias, rng);
  }
}

template <typename Scalar>
Tensor<Scalar> Spc<Scalar>::concat(const std::vector<Tensor<Scalar>>& maps, Mode mode) {
  if (static_cast<Index>(maps.size()) != cfg_.direction_count()) {
    throw DimensionError(this->name_ + ": got " + std::to_string(maps.size()) + " maps for N_D=" +
                         std::to_string(cfg_.direction_count()));
  }
  for (const auto& m : maps) {
    if (m.c() != in_) throw DimensionError(this->name_ + ": map " + m.shape().str() + " has wrong C");
  }
  switch (cfg_.mixing) {
    case MixingWay::kReduceConcatFuse:
    case MixingWay::kReduceConcat: {
      std::vector<TensorT> parts;
      parts.reserve(maps.size());
      for (std::size_t k = 0; k < maps.size(); ++k) parts.push_back(reduce_[k]->forward(maps[k], mode));
      TensorT cat = concat_channels(parts);
      return fuse_ ? fuse_->forward(cat, mode) : cat;
    }
    case MixingWay::kConcatFuse:
      return fuse_->forward(concat_channels(maps), mode);
    case MixingWay::kSumFuse:
    case MixingWay::kSum: {
      TensorT sum = maps.front();
      for (std::size_t k = 1; k < maps.size(); ++k) sum += maps[k];
      return fuse_ ? fuse_->forward(sum, mode) : sum;
    }
  }
  throw ConfigError("unreachable mixing way");
}

template <typename Scalar>
Tensor<Scalar> Spc<Scalar>::forward(const Tensor<Scalar>& x, Mode mode) {
  describe(x.shape(), nullptr);
  in_shape_ = x.shape();
  return concat(pillars_shift(x, cfg_), mode);
}

template <typename Scalar>
Tensor<Scalar> Spc<Scalar>::backward(const Tensor<Scalar>& grad_out) {
  const std::size_t nd = cfg_.directions.size();
  std::vector<TensorT> grad_maps;
  grad_maps.reserve(nd);
  switch (cfg_.mixing) {
    case MixingWay::kReduceConcatFuse:
    case MixingWay::kReduceConcat: {
      const TensorT g = fuse_ ? fuse_->backward(grad_out) : grad_out;
      const Index width = in_ / static_cast<Index>(nd);
      for (std::size_t k = 0; k < nd; ++k) {
        grad_maps.push_back(reduce_[k]->backward(slice_channels(g, static_cast<Index>(k) * width, width)));
      }
      break;
    }
    case MixingWay::kConcatFuse: {
      const TensorT g = fuse_->backward(grad_out);
      for (std::size_t k = 0; k < nd; ++k) grad_maps.push_back(slice_channels(g, static_cast<Index>(k) * in_, in_));
      break;
    }
    case MixingWay::kSumFuse:
    case MixingWay::kSum: {
      const TensorT g = fuse_ ? fuse_->backward(grad_out) : grad_out;
      grad_maps.assign(nd, g);
      break;
    }
  }
  return pillars_shift_backward(grad_maps, cfg_);
}

template <typename Scalar>
Shape Spc<Scalar>::describe(const Shape& in, CostTable* table) const {
  if (in.c != in_) {
    throw DimensionError(this->name_ + ": expects C=" + std::to_string(in_) + ", got " + in.str());
  }
  for (Direction d : cfg_.directions) check_shift(in, d, cfg_.steps, cfg_.padding);
  Shape s = in;
  if (!reduce_.empty()) {
    for (const auto& r : reduce_) r->describe(in, table);
    s.c = in_;
  } else if (cfg_.mixing == MixingWay::kConcatFuse) {
    s.c = in_ * cfg_.direction_count();
  }
  if (fuse_) s = fuse_->describe(s, table);
  return s;
}

template <typename Scalar>
void Spc<Scalar>::collect_parameters(std::vector<ParameterT*>& out) {
  for (auto& r : reduce_) r->collect_parameters(out);
  if (fuse_) fuse_->collect_parameters(out);
}

#define CATERPILLAR_INSTANTIATE(Scalar)                                                              \
  template Tensor<Scalar> shift2d(const Tensor<Scalar>&, Direction, Index);                           \
  template Tensor<Scalar> pad2d(const Tensor<Scalar>&, Direction, Index, PaddingMode,                 \
                                const Tensor<Scalar>&);                                               \
  template std::vector<Tensor<Scalar>> pillars_shift(const Tensor<Scalar>&, const SpcConfig&);        \
  template Tensor<Scalar> pillars_shift_backward(const std::vector<Tensor<Scalar>>&, const SpcConfig&); \
  template class Spc<Scalar>;

CATERPILLAR_INSTANTIATE(float)
CATERPILLAR_INSTANTIATE(double)

}  // namespace caterpillar
