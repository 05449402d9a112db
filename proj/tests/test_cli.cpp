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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "caterpillar/checkpoint.hpp"
#include "caterpillar/cli.hpp"
#include "caterpillar/data.hpp"
#include "caterpillar/features.hpp"

using namespace caterpillar;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  for (std::string line; std::getline(is, line);) out.push_back(line);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream os(p, std::ios::binary);
  os << bytes;
}

/// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("caterpillar_cli_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

const std::vector<std::string> kMicro = {"--width", "8", "--depths", "1,1,1,1", "--patch", "1", "--classes", "4"};
const std::vector<std::string> kData = {"--synth-n", "16", "--synth-hw", "16", "--synth-classes", "4"};

std::vector<std::string> join(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

/// Value after "key=" in a space-separated line.
std::string field(const std::string& line, const std::string& key) {
  const auto at = line.find(key + "=");
  REQUIRE(at != std::string::npos);
  const auto start = at + key.size() + 1;
  return line.substr(start, line.find(' ', start) - start);
}

ModelSpec micro_spec(LocalMixer mixer) {
  ModelSpec spec;
  spec.variant = "custom";
  spec.base_width = 8;
  spec.channels = {8, 16, 32, 64};
  spec.depths = {1, 1, 1, 1};
  spec.patch_size = 1;
  spec.input_h = spec.input_w = 16;
  spec.num_classes = 4;
  spec.block.local_mixer = mixer;
  spec.block.combine = CombineStrategy::kTwoResidual;
  return spec;
}

bool ends_with(const std::string& s, const std::string& tail) {
  return s.size() >= tail.size() && s.compare(s.size() - tail.size(), tail.size(), tail) == 0;
}

/// Zeroes the global mixer and FFN outputs so every block reduces to its local residual.
void silence_global_and_ffn(Model<float>& m) {
  for (auto* p : m.parameters())
    if (p->name.find(".smlp.fuse.") != std::string::npos || p->name.find(".ffn.fc2.") != std::string::npos)
      p->value.setZero();
}

LabeledImages images_of(const Tensor<float>& x) {
  LabeledImages d;
  d.images = x;
  d.labels.assign(static_cast<std::size_t>(x.n()), 0);
  d.class_count = 4;
  return d;
}

std::vector<std::string> dump_args(const std::string& ckpt, const std::string& blob, const std::string& out_dir,
                                   const std::string& stages) {
  return {"dump-features", "--checkpoint", ckpt, "--data", "raw", "--data-files", blob,
          "--stage", stages, "--out-dir", out_dir};
}

}  // namespace

TEST_CASE("exit codes for usage errors") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  CHECK(cli({"paramcount", "--no-such-flag"}).code == kExitUsage);
  CHECK(cli({"paramcount", "--preset", "Q"}).code == kExitUsage);
  CHECK(cli({"paramcount", "--spec", "/nonexistent/spec.txt"}).code == kExitUsage);
  CHECK(cli({"--help"}).code == kExitOk);
  CHECK(cli({"paramcount", "--help"}).code == kExitOk);
}

TEST_CASE("malformed spec files are configuration errors") {
  TempDir dir("spec");
  spit(dir / "bad.txt", "[model]\nvariant = custom\nwidht = 8\n");
  const Run r = cli({"paramcount", "--spec", dir / "bad.txt"});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("widht") != std::string::npos);
}

TEST_CASE("spec files written by --spec-out are read back") {
  TempDir dir("specout");
  REQUIRE(cli(join(join({"train", "--steps", "1", "--batch-size", "8", "--spec-out", dir / "m.txt"}, kMicro),
                   kData))
              .code == kExitOk);
  const Run a = cli(join({"paramcount", "--resolution", "16"}, kMicro));
  const Run b = cli({"paramcount", "--spec", dir / "m.txt"});
  REQUIRE(a.code == kExitOk);
  REQUIRE(b.code == kExitOk);
  CHECK(a.out == b.out);
}

TEST_CASE("paramcount for the tiny preset") {
  const Run r = cli({"paramcount", "--preset", "T", "--compare-local", "dwconv"});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("params: 29,022,384 (29.02M)") != std::string::npos);
  CHECK(r.out.find("macs: 6,018,436,480") != std::string::npos);
  CHECK(r.out.find("local mixer closed forms (d=80, k=3, no bias): conv=57600 spc=12800 dwconv=720 conv/spc=4.5") !=
        std::string::npos);
  CHECK(r.out.find("delta params vs local_mixer=dwconv: 4,883,200 (4.883M)") != std::string::npos);
  CHECK(cli({"paramcount", "--preset", "Mi"}).out.find("params: 6,182,696") != std::string::npos);
}

TEST_CASE("paramcount table has one row per costed layer and sums to the total") {
  TempDir dir("table");
  const Run r = cli(join({"paramcount", "--resolution", "16", "--csv", dir / "t.csv"}, kMicro));
  REQUIRE(r.code == kExitOk);
  const auto rows = lines_of(slurp(dir.path / "t.csv"));
  REQUIRE(rows.size() > 2);
  CHECK(rows[0] == "layer,kind,output_shape,params,macs");
  long long params = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    const auto last = row.rfind(',');
    const auto prev = row.rfind(',', last - 1);
    params += std::stoll(row.substr(prev + 1, last - prev - 1));
  }
  CHECK(r.out.find("params: 73,424") != std::string::npos);
  CHECK(params == 73424);
  const Run t = cli(join({"paramcount", "--resolution", "16", "--table"}, kMicro));
  CHECK(t.out.find("layer,kind,output_shape,params,macs\n") != std::string::npos);
}

TEST_CASE("gradcheck default suite passes and the corrupted control fails") {
  const Run r = cli({"gradcheck"});
  CHECK(r.code == kExitOk);
  const auto lines = lines_of(r.out);
  REQUIRE(!lines.empty());
  CHECK(lines.front() == "target,config,max_rel_error,tolerance,worst,status");
  CHECK(ends_with(lines.back(), "checks passed"));
  const auto slash = lines.back().find('/');
  CHECK(lines.back().substr(0, slash) == lines.back().substr(slash + 1, lines.back().find(' ') - slash - 1));

  const Run bad = cli({"gradcheck", "--target", "corrupted-linear"});
  CHECK(bad.code == kExitVerificationFailure);
  CHECK(bad.out.find(",FAIL") != std::string::npos);
  CHECK(cli({"gradcheck", "--target", "nope"}).code == kExitUsage);
}

TEST_CASE("bench with one rep emits one row per operator") {
  const Run r = cli({"bench", "--reps", "1", "--warmup", "0", "--hw", "8", "--channels", "8", "--batch", "2"});
  REQUIRE(r.code == kExitOk);
  const auto lines = lines_of(r.out);
  REQUIRE(lines.size() >= 3);
  CHECK(lines[0] == "# caterpillar-bench v1");
  CHECK(lines[1].rfind("# dtype=f32 threads=1 timestamp=", 0) == 0);
  CHECK(ends_with(lines[1], "macs=multiply-accumulates"));
  CHECK(lines[2] == "operator,config,input_shape,direction,reps,wall_time_s,images_per_s,analytic_macs");
  std::vector<std::string> ops;
  for (std::size_t i = 3; i < lines.size(); ++i) {
    if (lines[i].empty() || lines[i][0] == '#') continue;
    ops.push_back(lines[i].substr(0, lines[i].find(',')));
    CHECK(lines[i].find(",fwd,1,") != std::string::npos);
  }
  CHECK(ops == std::vector<std::string>{"spc", "conv3x3", "dwconv3x3"});
  CHECK(r.out.find("# analytic MAC ratio conv3x3/spc(reduce_concat_fuse) at equal width: 4.5") != std::string::npos);
  CHECK(r.out.find("# cross-check spc: analytic=16384 estimate=16384 ok") != std::string::npos);
  CHECK(r.out.find("# cross-check conv3x3: analytic=73728 estimate=73728 ok") != std::string::npos);
  CHECK(r.out.find("# cross-check dwconv3x3: analytic=9216 estimate=9216 ok") != std::string::npos);
}

TEST_CASE("bench rejects bad configurations") {
  CHECK(cli({"bench", "--op", "fft"}).code == kExitUsage);
  CHECK(cli({"bench", "--reps", "0"}).code == kExitUsage);
  CHECK(cli({"bench", "--hw", "8", "--channels", "6", "--config", "directions=4 mixing=reduce_concat_fuse"}).code ==
        kExitUsage);
}

TEST_CASE("train histories are byte-identical for a fixed seed") {
  TempDir dir("train");
  const auto base = join(join({"train", "--steps", "6", "--batch-size", "8", "--seed", "3"}, kMicro), kData);
  const Run a = cli(join(base, {"--history", dir / "a.csv"}));
  const Run b = cli(join(base, {"--history", dir / "b.csv"}));
  REQUIRE(a.code == kExitOk);
  REQUIRE(b.code == kExitOk);
  const std::string ha = slurp(dir.path / "a.csv");
  CHECK(ha == slurp(dir.path / "b.csv"));
  const auto rows = lines_of(ha);
  REQUIRE(rows.size() == 7);
  CHECK(rows[0] == "step,lr,loss,acc");
  CHECK(rows[1].rfind("0,", 0) == 0);
  const Run c = cli(join(join({"train", "--steps", "6", "--batch-size", "8", "--seed", "4", "--history", dir / "c.csv"},
                              kMicro),
                         kData));
  REQUIRE(c.code == kExitOk);
  CHECK(slurp(dir.path / "c.csv") != ha);
}

TEST_CASE("eval reproduces the accuracy logged at a checkpoint") {
  TempDir dir("eval");
  const Run t = cli(join(join({"train", "--steps", "6", "--batch-size", "8", "--checkpoint-every", "3", "--checkpoint",
                               dir / "run.ckpt", "--history", dir / "h.csv"},
                              kMicro),
                         kData));
  REQUIRE(t.code == kExitOk);
  const auto lines = lines_of(t.out);
  REQUIRE(lines.size() >= 2);
  REQUIRE(lines[0].rfind("checkpoint step=3 ", 0) == 0);
  const std::string path = field(lines[0], "path");
  const Run e = cli(join({"eval", "--checkpoint", path}, kData));
  REQUIRE(e.code == kExitOk);
  CHECK(e.out == "top1=" + field(lines[0], "train_acc") + "\n");

  const Run fin = cli(join({"eval", "--checkpoint", dir / "run.ckpt"}, kData));
  CHECK(fin.out == "top1=" + field(lines.back(), "train_acc") + "\n");

  const Run mismatch = cli({"eval", "--checkpoint", dir / "run.ckpt", "--synth-hw", "9", "--synth-classes", "4"});
  CHECK(mismatch.code == kExitUsage);
  CHECK(mismatch.out.empty());
  CHECK(cli({"eval", "--checkpoint", dir / "missing.ckpt"}).code == kExitUsage);
}

TEST_CASE("train --require-accuracy fails verification when unmet") {
  const Run r = cli(join(join({"train", "--steps", "1", "--batch-size", "8", "--require-accuracy", "1.01"}, kMicro),
                         kData));
  CHECK(r.code == kExitVerificationFailure);
}

TEST_CASE("dump-features writes PGM planes") {
  TempDir dir("dump");
  REQUIRE(cli(join(join({"train", "--steps", "1", "--batch-size", "8", "--checkpoint", dir / "m.ckpt"}, kMicro),
                   kData))
              .code == kExitOk);
  const Run r = cli(join(
      {"dump-features", "--checkpoint", dir / "m.ckpt", "--stage", "1,4", "--out-dir", dir / "f", "--index", "2"},
      kData));
  REQUIRE(r.code == kExitOk);
  const std::string s1 = slurp(dir.path / "f" / "stage1_mean.pgm");
  const std::string s4 = slurp(dir.path / "f" / "stage4_mean.pgm");
  CHECK(s1.rfind("P5\n16 16\n255\n", 0) == 0);
  CHECK(s1.size() == 13 + 256);
  CHECK(s4.rfind("P5\n2 2\n255\n", 0) == 0);
  CHECK(s4.size() == 11 + 4);

  const Run ch = cli(join({"dump-features", "--checkpoint", dir / "m.ckpt", "--stage", "2", "--reduce", "channel:3",
                           "--out-dir", dir / "f"},
                          kData));
  CHECK(ch.code == kExitOk);
  CHECK(fs::exists(dir.path / "f" / "stage2_channel3.pgm"));

  CHECK(cli(join({"dump-features", "--checkpoint", dir / "m.ckpt", "--stage", "5", "--out-dir", dir / "f"}, kData))
            .code == kExitUsage);
  CHECK(cli(join({"dump-features", "--checkpoint", dir / "m.ckpt", "--stage", "1", "--reduce", "channel:99",
                  "--out-dir", dir / "f"},
                 kData))
            .code == kExitUsage);
  CHECK(cli(join({"dump-features", "--checkpoint", dir / "m.ckpt", "--stage", "1", "--index", "16", "--out-dir",
                  dir / "f"},
                 kData))
            .code == kExitUsage);
}

TEST_CASE("constant input through pillar-wise blocks dumps constant planes") {
  TempDir dir("const");
  const auto model = build_caterpillar<float>(micro_spec(LocalMixer::kIdentity), 11);
  silence_global_and_ffn(*model);
  save_checkpoint(*model, dir / "m.ckpt");
  Tensor<float> x(Shape{1, 16, 16, 3});
  x.pillars().setConstant(0.5f);
  spit(dir.path / "x.bin", write_raw_blob(images_of(x)));
  REQUIRE(cli(dump_args(dir / "m.ckpt", dir / "x.bin", dir / "f", "1,2,3,4")).code == kExitOk);
  for (const int k : {1, 2, 3, 4}) {
    const std::string pgm = slurp(dir.path / "f" / ("stage" + std::to_string(k) + "_mean.pgm"));
    const std::size_t side = static_cast<std::size_t>(16 >> (k - 1));
    const std::string head = "P5\n" + std::to_string(side) + " " + std::to_string(side) + "\n255\n";
    REQUIRE(pgm.size() == head.size() + side * side);
    CHECK(pgm.substr(0, head.size()) == head);
    CHECK(pgm.substr(head.size()) == std::string(side * side, '\0'));
  }
}

TEST_CASE("identity and spc local mixers differ on the neighbours of a one-hot pixel") {
  TempDir dir("onehot");
  Tensor<float> x(Shape{1, 16, 16, 3});
  x.pillars().setZero();
  x(0, 7, 9, 0) = 1.0f;
  spit(dir.path / "x.bin", write_raw_blob(images_of(x)));

  auto plane_of = [&](LocalMixer mixer, const std::string& tag) {
    const auto model = build_caterpillar<float>(micro_spec(mixer), 5);
    silence_global_and_ffn(*model);
    for (auto* p : model->parameters()) {
      if (p->name == "patch_embed.w") {
        p->value.setZero();
        for (Index c = 0; c < 3; ++c) p->value(c, c) = 1.0f;
      } else if (p->name == "patch_embed.b") {
        p->value.setZero();
      } else if (p->name.rfind("stage1.block1.spc.", 0) == 0) {
        if (ends_with(p->name, ".w")) p->value.setOnes();
        if (ends_with(p->name, ".b")) p->value.setZero();
      }
    }
    save_checkpoint(*model, dir / (tag + ".ckpt"));
    REQUIRE(cli(dump_args(dir / (tag + ".ckpt"), dir / "x.bin", dir / tag, "1")).code == kExitOk);
    const std::string pgm = slurp(dir.path / tag / "stage1_mean.pgm");
    const std::string head = "P5\n16 16\n255\n";
    REQUIRE(pgm.size() == head.size() + 256);
    return pgm.substr(head.size());
  };
  const std::string id = plane_of(LocalMixer::kIdentity, "identity");
  const std::string spc = plane_of(LocalMixer::kSpc, "spc");
  auto at = [](const std::string& p, int i, int j) { return static_cast<unsigned char>(p[i * 16 + j]); };
  const unsigned char id_bg = at(id, 0, 0);
  const unsigned char spc_bg = at(spc, 0, 0);
  CHECK(at(id, 7, 9) != id_bg);
  for (const auto& [i, j] : std::vector<std::pair<int, int>>{{6, 9}, {8, 9}, {7, 8}, {7, 10}}) {
    CHECK(at(id, i, j) == id_bg);
    CHECK(at(spc, i, j) != spc_bg);
  }
  CHECK(at(spc, 5, 9) == spc_bg);
  CHECK(at(spc, 6, 8) == spc_bg);
}

TEST_CASE("encode_pgm scales min-max to bytes") {
  Eigen::MatrixXd plane(2, 3);
  plane << 0, 1, 2, 3, 4, 8;
  const std::string pgm = encode_pgm(plane);
  const std::string head = "P5\n3 2\n255\n";
  REQUIRE(pgm.size() == head.size() + 6);
  CHECK(pgm.substr(0, head.size()) == head);
  const auto* px = reinterpret_cast<const unsigned char*>(pgm.data() + head.size());
  CHECK(px[0] == 0);
  CHECK(px[5] == 255);
  CHECK(px[4] == 128);
  for (int i = 1; i < 6; ++i) CHECK(px[i] >= px[i - 1]);
  CHECK(encode_pgm(Eigen::MatrixXd::Constant(2, 2, 3.5)) == "P5\n2 2\n255\n" + std::string(4, '\0'));
}
