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


#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>

#include "caterpillar/data.hpp"
#include "caterpillar/error.hpp"
#include "caterpillar/rng.hpp"

namespace caterpillar {

namespace {

constexpr Index kCifarSide = 32;
constexpr Index kCifarPixels = kCifarSide * kCifarSide;
constexpr std::size_t kCifarRecord = 1 + 3 * kCifarPixels;

float byte_to_unit(unsigned char v) { return static_cast<float>(v) / 255.0f; }

char unit_to_byte(float x) {
  if (!(x >= 0.0f && x <= 1.0f)) throw FormatError("pixel value " + std::to_string(x) + " outside [0,1]");
  return static_cast<char>(static_cast<unsigned char>(std::lround(x * 255.0f)));
}

std::uint32_t read_be32(std::string_view bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (std::size_t k = 0; k < 4; ++k) v = (v << 8) | static_cast<unsigned char>(bytes[at + k]);
  return v;
}

std::uint32_t read_le32(std::string_view bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (std::size_t k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + k])) << (8 * k);
  return v;
}

void put_be32(std::string& out, std::uint32_t v) {
  for (int k = 3; k >= 0; --k) out += static_cast<char>((v >> (8 * k)) & 0xff);
}

void put_le32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out += static_cast<char>((v >> (8 * k)) & 0xff);
}

Tensor<float> images_for(Index n, Index h, Index w, Index c, const std::string& what) {
  if (n < 1) throw FormatError(what + ": no images");
  if (h < 1 || w < 1 || c < 1) throw FormatError(what + ": empty image dimensions");
  return Tensor<float>(Shape{n, h, w, c});
}

}  // namespace

void LabeledImages::validate() const {
  if (labels.empty()) throw FormatError("dataset is empty");
  if (images.n() != size())
    throw FormatError("dataset has " + std::to_string(images.n()) + " images but " + std::to_string(size()) +
                      " labels");
  if (class_count < 1) throw FormatError("dataset class count must be positive");
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] < 0 || labels[i] >= class_count)
      throw FormatError("label " + std::to_string(labels[i]) + " of sample " + std::to_string(i) +
                        " outside [0," + std::to_string(class_count) + ")");
}

LabeledImages LabeledImages::subset(const std::vector<Index>& indices) const {
  if (indices.empty()) throw IndexError("empty subset");
  LabeledImages out;
  out.class_count = class_count;
  out.images = Tensor<float>(Shape{static_cast<Index>(indices.size()), images.h(), images.w(), images.c()});
  const Index per = images.h() * images.w();
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const Index i = indices[k];
    if (i < 0 || i >= size()) throw IndexError("sample index " + std::to_string(i) + " out of range");
    out.images.pillars().middleRows(static_cast<Index>(k) * per, per) = images.pillars().middleRows(i * per, per);
    out.labels.push_back(labels[static_cast<std::size_t>(i)]);
  }
  return out;
}

bool LabeledImages::operator==(const LabeledImages& other) const {
  return class_count == other.class_count && labels == other.labels && images.shape() == other.images.shape() &&
         images.pillars() == other.images.pillars();
}

LabeledImages parse_cifar10_binary(std::string_view bytes) {
  if (bytes.empty()) throw FormatError("CIFAR-10: empty input");
  if (bytes.size() % kCifarRecord != 0) {
    const std::size_t start = bytes.size() - bytes.size() % kCifarRecord;
    throw FormatError("CIFAR-10: truncated record at byte offset " + std::to_string(start) + " (" +
                      std::to_string(bytes.size() - start) + " of " + std::to_string(kCifarRecord) + " bytes)");
  }
  const Index n = static_cast<Index>(bytes.size() / kCifarRecord);
  LabeledImages out;
  out.class_count = 10;
  out.images = images_for(n, kCifarSide, kCifarSide, 3, "CIFAR-10");
  out.labels.resize(static_cast<std::size_t>(n));
  for (Index r = 0; r < n; ++r) {
    const std::size_t base = static_cast<std::size_t>(r) * kCifarRecord;
    const auto label = static_cast<unsigned char>(bytes[base]);
    if (label > 9)
      throw FormatError("CIFAR-10: label byte " + std::to_string(label) + " at byte offset " + std::to_string(base));
    out.labels[static_cast<std::size_t>(r)] = label;
    for (Index c = 0; c < 3; ++c)
      for (Index p = 0; p < kCifarPixels; ++p)
        out.images(r, p / kCifarSide, p % kCifarSide, c) =
            byte_to_unit(static_cast<unsigned char>(bytes[base + 1 + static_cast<std::size_t>(c * kCifarPixels + p)]));
  }
  return out;
}

LabeledImages load_cifar10_binary(const std::vector<std::string>& files) {
  if (files.empty()) throw FormatError("CIFAR-10: no input files");
  std::string all;
  for (const auto& f : files) {
    std::string bytes = read_file(f);
    try {
      parse_cifar10_binary(bytes);
    } catch (const FormatError& e) {
      throw FormatError(f + ": " + e.what());
    }
    all += bytes;
  }
  return parse_cifar10_binary(all);
}

std::string write_cifar10_binary(const LabeledImages& data) {
  data.validate();
  if (data.images.h() != kCifarSide || data.images.w() != kCifarSide || data.images.c() != 3)
    throw DimensionError("CIFAR-10 records hold 32x32x3 images, got " + data.images.shape().str());
  if (data.class_count > 10) throw FormatError("CIFAR-10 records hold at most 10 classes");
  std::string out;
  out.reserve(static_cast<std::size_t>(data.size()) * kCifarRecord);
  for (Index r = 0; r < data.size(); ++r) {
    out += static_cast<char>(data.labels[static_cast<std::size_t>(r)]);
    for (Index c = 0; c < 3; ++c)
      for (Index p = 0; p < kCifarPixels; ++p) out += unit_to_byte(data.images(r, p / kCifarSide, p % kCifarSide, c));
  }
  return out;
}

LabeledImages parse_idx(std::string_view image_bytes, std::string_view label_bytes, int class_count) {
  if (image_bytes.size() < 16) throw FormatError("IDX images: truncated header (" + std::to_string(image_bytes.size()) + " bytes)");
  if (label_bytes.size() < 8) throw FormatError("IDX labels: truncated header (" + std::to_string(label_bytes.size()) + " bytes)");
  if (const auto m = read_be32(image_bytes, 0); m != 0x00000803)
    throw FormatError("IDX images: magic " + std::to_string(m) + " is not 0x00000803");
  if (const auto m = read_be32(label_bytes, 0); m != 0x00000801)
    throw FormatError("IDX labels: magic " + std::to_string(m) + " is not 0x00000801");
  const std::uint64_t n = read_be32(image_bytes, 4);
  const std::uint64_t h = read_be32(image_bytes, 8);
  const std::uint64_t w = read_be32(image_bytes, 12);
  const std::uint64_t nl = read_be32(label_bytes, 4);
  if (n != nl)
    throw FormatError("IDX count mismatch: image count " + std::to_string(n) + " vs label count " + std::to_string(nl));
  if (image_bytes.size() != 16 + n * h * w)
    throw FormatError("IDX images: data holds " + std::to_string(image_bytes.size() - 16) + " bytes, expected " +
                      std::to_string(n * h * w));
  if (label_bytes.size() != 8 + n)
    throw FormatError("IDX labels: data holds " + std::to_string(label_bytes.size() - 8) + " bytes, expected " +
                      std::to_string(n));
  LabeledImages out;
  out.class_count = class_count;
  out.images = images_for(static_cast<Index>(n), static_cast<Index>(h), static_cast<Index>(w), 1, "IDX images");
  for (std::size_t k = 0; k < n * h * w; ++k) out.images.data()[k] = byte_to_unit(static_cast<unsigned char>(image_bytes[16 + k]));
  for (std::size_t k = 0; k < n; ++k) {
    const int label = static_cast<unsigned char>(label_bytes[8 + k]);
    if (label >= class_count)
      throw FormatError("IDX labels: label " + std::to_string(label) + " at byte offset " + std::to_string(8 + k) +
                        " outside [0," + std::to_string(class_count) + ")");
    out.labels.push_back(label);
  }
  return out;
}

LabeledImages load_idx(const std::string& image_file, const std::string& label_file, int class_count) {
  return parse_idx(read_file(image_file), read_file(label_file), class_count);
}

std::pair<std::string, std::string> write_idx(const LabeledImages& data) {
  data.validate();
  if (data.images.c() != 1) throw DimensionError("IDX images are single-channel, got " + data.images.shape().str());
  if (data.class_count > 256) throw FormatError("IDX labels are single bytes");
  std::string images, labels;
  put_be32(images, 0x00000803);
  put_be32(images, static_cast<std::uint32_t>(data.size()));
  put_be32(images, static_cast<std::uint32_t>(data.images.h()));
  put_be32(images, static_cast<std::uint32_t>(data.images.w()));
  for (Index k = 0; k < data.images.pillars().size(); ++k) images += unit_to_byte(data.images.data()[k]);
  put_be32(labels, 0x00000801);
  put_be32(labels, static_cast<std::uint32_t>(data.size()));
  for (int l : data.labels) labels += static_cast<char>(l);
  return {images, labels};
}

LabeledImages parse_raw_blob(std::string_view bytes) {
  if (bytes.size() < 20 || bytes.substr(0, 4) != "RAW1") throw FormatError("raw blob: missing RAW1 magic");
  const Index n = read_le32(bytes, 4), h = read_le32(bytes, 8), w = read_le32(bytes, 12), c = read_le32(bytes, 16);
  LabeledImages out;
  out.images = images_for(n, h, w, c, "raw blob");
  const std::size_t count = static_cast<std::size_t>(n * h * w * c);
  const std::size_t labels_at = 20 + 4 * count;
  if (bytes.size() < labels_at + 4) throw FormatError("raw blob: truncated pixel data at byte offset " + std::to_string(bytes.size()));
  for (std::size_t k = 0; k < count; ++k) out.images.data()[k] = std::bit_cast<float>(read_le32(bytes, 20 + 4 * k));
  out.class_count = static_cast<int>(read_le32(bytes, labels_at));
  if (bytes.size() != labels_at + 4 + 4 * static_cast<std::size_t>(n))
    throw FormatError("raw blob: label section holds " + std::to_string(bytes.size() - labels_at - 4) +
                      " bytes, expected " + std::to_string(4 * n));
  for (Index k = 0; k < n; ++k)
    out.labels.push_back(static_cast<int>(read_le32(bytes, labels_at + 4 + 4 * static_cast<std::size_t>(k))));
  out.validate();
  return out;
}

LabeledImages load_raw_blob(const std::string& file) { return parse_raw_blob(read_file(file)); }

std::string write_raw_blob(const LabeledImages& data) {
  data.validate();
  std::string out = "RAW1";
  for (Index d : {data.images.n(), data.images.h(), data.images.w(), data.images.c()})
    put_le32(out, static_cast<std::uint32_t>(d));
  for (Index k = 0; k < data.images.pillars().size(); ++k) put_le32(out, std::bit_cast<std::uint32_t>(data.images.data()[k]));
  put_le32(out, static_cast<std::uint32_t>(data.class_count));
  for (int l : data.labels) put_le32(out, static_cast<std::uint32_t>(l));
  return out;
}

LabeledImages synth_blobs(std::uint64_t seed, Index n, Index h, Index w, Index c, int k, double sigma) {
  if (k < 1 || k > n) throw ConfigError("synth_blobs: need 1 <= K <= N");
  if (sigma < 0) throw ConfigError("synth_blobs: sigma must be non-negative");
  Rng rng(seed);
  const Index per = h * w * c;
  std::vector<float> templates(static_cast<std::size_t>(k * per));
  for (auto& t : templates) t = static_cast<float>(rng.uniform());
  LabeledImages out;
  out.class_count = k;
  out.images = images_for(n, h, w, c, "synth_blobs");
  for (Index i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % k);
    out.labels.push_back(label);
    for (Index e = 0; e < per; ++e) {
      double v = templates[static_cast<std::size_t>(label * per + e)];
      if (sigma > 0) v += sigma * rng.normal();
      out.images.data()[i * per + e] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return out;
}

void normalize(LabeledImages& data, const std::vector<float>& mean, const std::vector<float>& stddev) {
  const Index c = data.images.c();
  if (static_cast<Index>(mean.size()) != c || static_cast<Index>(stddev.size()) != c)
    throw DimensionError("normalize: need one mean and one std per channel (" + std::to_string(c) + ")");
  for (Index k = 0; k < c; ++k) {
    if (!(stddev[static_cast<std::size_t>(k)] > 0)) throw ConfigError("normalize: std must be positive");
    auto col = data.images.pillars().col(k);
    col = (col.array() - mean[static_cast<std::size_t>(k)]) / stddev[static_cast<std::size_t>(k)];
  }
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open '" + path + "'");
  return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open '" + path + "' for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw FormatError("write to '" + path + "' failed");
}

}  // namespace caterpillar
