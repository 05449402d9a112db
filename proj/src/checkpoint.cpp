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


#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "caterpillar/checkpoint.hpp"
#include "caterpillar/error.hpp"

namespace caterpillar {

namespace {

constexpr std::string_view kMagic = "CATERPILLAR-CHECKPOINT";
constexpr std::string_view kKindNames[] = {"weight", "bias", "norm", "scale", "buffer"};

std::string shape_text(const std::vector<Index>& shape) {
  std::string out;
  for (std::size_t k = 0; k < shape.size(); ++k) {
    if (k) out += 'x';
    out += std::to_string(shape[k]);
  }
  return out;
}

std::vector<Index> parse_shape(const std::string& s, const std::string& where) {
  std::vector<Index> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto x = s.find('x', pos);
    const std::string part = s.substr(pos, x == std::string::npos ? std::string::npos : x - pos);
    try {
      std::size_t used = 0;
      const long long v = std::stoll(part, &used);
      if (used != part.size() || v < 1) throw FormatError("");
      out.push_back(static_cast<Index>(v));
    } catch (const std::exception&) {
      throw FormatError(where + ": bad shape '" + s + "'");
    }
    if (x == std::string::npos) break;
    pos = x + 1;
  }
  return out;
}

std::string next_line(std::istream& is, const char* what) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError(std::string("checkpoint truncated before ") + what);
  return line;
}

std::int64_t expect_count(const std::string& line, std::string_view key) {
  std::istringstream ls(line);
  std::string k;
  long long v = -1;
  if (!(ls >> k >> v) || k != key || v < 0)
    throw FormatError("checkpoint: expected '" + std::string(key) + " <n>', got '" + line + "'");
  return v;
}

}  // namespace

std::string_view to_string(ParamKind kind) { return kKindNames[static_cast<int>(kind)]; }

ParamKind parse_param_kind(std::string_view s) {
  for (int k = 0; k < 5; ++k)
    if (kKindNames[k] == s) return static_cast<ParamKind>(k);
  throw FormatError("unknown parameter kind '" + std::string(s) + "'");
}

template <typename Scalar>
Checkpoint make_checkpoint(Model<Scalar>& model) {
  Checkpoint ckpt;
  ckpt.spec_text = model.spec().str();
  for (auto* p : model.parameters()) {
    CheckpointEntry e{p->name, p->kind, p->shape, static_cast<std::int64_t>(ckpt.data.size()), p->size()};
    if (e.shape.empty()) e.shape = {p->value.rows(), p->value.cols()};
    ckpt.entries.push_back(e);
    for (Index k = 0; k < p->size(); ++k) ckpt.data.push_back(static_cast<float>(p->value.data()[k]));
  }
  return ckpt;
}

void write_checkpoint(const Checkpoint& ckpt, std::ostream& os) {
  os << kMagic << ' ' << ckpt.version << '\n';
  os << "spec " << ckpt.spec_text.size() << '\n' << ckpt.spec_text;
  os << "params " << ckpt.entries.size() << '\n';
  for (const auto& e : ckpt.entries) {
    os << e.name << ' ' << to_string(e.kind) << ' ' << shape_text(e.shape) << ' ' << e.offset << ' ' << e.count
       << '\n';
  }
  os << "data " << ckpt.data.size() * 4 << '\n';
  std::string blob(ckpt.data.size() * 4, '\0');
  for (std::size_t k = 0; k < ckpt.data.size(); ++k) {
    const auto bits = std::bit_cast<std::uint32_t>(ckpt.data[k]);
    for (int b = 0; b < 4; ++b) blob[4 * k + static_cast<std::size_t>(b)] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  os.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!os) throw FormatError("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& is) {
  Checkpoint ckpt;
  {
    std::istringstream ls(next_line(is, "header"));
    std::string magic;
    if (!(ls >> magic >> ckpt.version) || magic != kMagic) throw FormatError("checkpoint: bad magic");
    if (ckpt.version != kCheckpointVersion)
      throw FormatError("checkpoint: unsupported version " + std::to_string(ckpt.version));
  }
  const auto spec_bytes = expect_count(next_line(is, "spec"), "spec");
  ckpt.spec_text.resize(static_cast<std::size_t>(spec_bytes));
  if (!is.read(ckpt.spec_text.data(), spec_bytes)) throw FormatError("checkpoint: truncated spec text");
  const auto count = expect_count(next_line(is, "params"), "params");
  std::int64_t expected_offset = 0;
  for (std::int64_t k = 0; k < count; ++k) {
    const std::string line = next_line(is, "parameter table");
    const std::string where = "checkpoint entry " + std::to_string(k);
    std::istringstream ls(line);
    std::string name, kind, shape;
    long long offset = -1, n = -1;
    if (!(ls >> name >> kind >> shape >> offset >> n)) throw FormatError(where + ": malformed line '" + line + "'");
    CheckpointEntry e{name, parse_param_kind(kind), parse_shape(shape, where), offset, n};
    std::int64_t product = 1;
    for (auto d : e.shape) product *= d;
    if (product != e.count) throw FormatError(where + " (" + name + "): shape does not match count");
    if (e.offset != expected_offset) throw FormatError(where + " (" + name + "): non-contiguous offset");
    expected_offset += e.count;
    ckpt.entries.push_back(std::move(e));
  }
  const auto bytes = expect_count(next_line(is, "data"), "data");
  if (bytes != 4 * expected_offset) throw FormatError("checkpoint: data size does not match the parameter table");
  std::string blob(static_cast<std::size_t>(bytes), '\0');
  if (!is.read(blob.data(), bytes)) throw FormatError("checkpoint: truncated data blob");
  ckpt.data.resize(static_cast<std::size_t>(expected_offset));
  for (std::size_t k = 0; k < ckpt.data.size(); ++k) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b)
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(blob[4 * k + static_cast<std::size_t>(b)]))
              << (8 * b);
    ckpt.data[k] = std::bit_cast<float>(bits);
  }
  return ckpt;
}

template <typename Scalar>
void apply_checkpoint(const Checkpoint& ckpt, Model<Scalar>& model) {
  auto params = model.parameters();
  if (params.size() != ckpt.entries.size()) {
    throw FormatError("checkpoint has " + std::to_string(ckpt.entries.size()) + " parameters, model has " +
                      std::to_string(params.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    const auto& e = ckpt.entries[k];
    const std::vector<Index> shape = p.shape.empty() ? std::vector<Index>{p.value.rows(), p.value.cols()} : p.shape;
    if (e.name != p.name || e.shape != shape || e.kind != p.kind) {
      throw FormatError("checkpoint entry '" + e.name + "' [" + shape_text(e.shape) + "] does not match model '" +
                        p.name + "' [" + shape_text(shape) + "]");
    }
    for (Index i = 0; i < p.size(); ++i)
      p.value.data()[i] = static_cast<Scalar>(ckpt.data[static_cast<std::size_t>(e.offset + i)]);
  }
}

template <typename Scalar>
void save_checkpoint(Model<Scalar>& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open '" + path + "' for writing");
  write_checkpoint(make_checkpoint(model), os);
}

template <typename Scalar>
std::unique_ptr<Model<Scalar>> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open '" + path + "'");
  const Checkpoint ckpt = read_checkpoint(is);
  auto model = std::make_unique<Model<Scalar>>(ModelSpec::parse(ckpt.spec_text), 0);
  apply_checkpoint(ckpt, *model);
  return model;
}

#define CATERPILLAR_INSTANTIATE(S)                                          \
  template Checkpoint make_checkpoint<S>(Model<S>&);                        \
  template void apply_checkpoint<S>(const Checkpoint&, Model<S>&);          \
  template void save_checkpoint<S>(Model<S>&, const std::string&);          \
  template std::unique_ptr<Model<S>> load_checkpoint<S>(const std::string&);

CATERPILLAR_INSTANTIATE(float)
CATERPILLAR_INSTANTIATE(double)

}  // namespace caterpillar
