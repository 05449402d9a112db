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


#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <ostream>

#include "caterpillar/bench.hpp"
#include "caterpillar/checkpoint.hpp"
#include "caterpillar/cli.hpp"
#include "caterpillar/error.hpp"
#include "caterpillar/features.hpp"
#include "caterpillar/grad_suite.hpp"
#include "caterpillar/train.hpp"

namespace caterpillar {

namespace {

struct SpecFlags {
  std::string spec_file;
  std::string preset;
  Index resolution = 224;
  Index ffn_ratio = 0;
  std::string profile;
  std::vector<Index> channels;
  Index width = 0;
  std::vector<Index> depths;
  Index patch = 0;
  Index classes = 0;
  std::string local_mixer;
  std::string combine;
  std::string spc;
  Index resnet = 0;
  std::string resnet_mixer = "conv3x3";
  bool small_stem = false;

  void add(CLI::App* app, bool with_preset_default) {
    app->add_option("--spec", spec_file, "ModelSpec text file");
    app->add_option("--preset", preset, "Caterpillar preset: Mi, Tx, T, S, B")
        ->check(CLI::IsMember({"Mi", "Tx", "T", "S", "B"}));
    if (with_preset_default) preset = "T";
    app->add_option("--resolution", resolution, "square input resolution");
    app->add_option("--ffn-ratio", ffn_ratio, "FFN expansion ratio");
    app->add_option("--profile", profile, "small-image profile: MIN, CIFAR, CIFAR100, Fashion");
    app->add_option("--channels", channels, "four stage widths, e.g. 72,144,288,576")->delimiter(',')->expected(4);
    app->add_option("--width", width, "first-stage width C (stages use C,2C,4C,8C)");
    app->add_option("--depths", depths, "four stage depths, e.g. 1,1,1,1")->delimiter(',')->expected(4);
    app->add_option("--patch", patch, "patch size");
    app->add_option("--classes", classes, "number of classes");
    app->add_option("--local-mixer", local_mixer, "spc, dwconv or identity");
    app->add_option("--combine", combine, "LG, GL, two_residual, sum, weighted_sum, concat_reduce");
    app->add_option("--spc", spc, "SPC settings, e.g. \"directions=8 steps=2 padding=reflect\"");
    app->add_option("--resnet", resnet, "build ResNet-18 with this base width instead");
    app->add_option("--resnet-mixer", resnet_mixer, "conv3x3 or spc")->check(CLI::IsMember({"conv3x3", "spc"}));
    app->add_flag("--small-stem", small_stem, "ResNet-18 3x3 stride-1 stem without max-pool");
  }

  bool custom() const { return width > 0 || !depths.empty(); }

  ModelSpec build() const {
    ModelSpec spec;
    if (!spec_file.empty()) {
      spec = ModelSpec::parse(read_file(spec_file));
    } else if (resnet > 0) {
      spec = ModelSpec::resnet18(resnet, resnet_mixer == "spc" ? ResNetMixer::kSpc : ResNetMixer::kConv3x3,
                                 classes > 0 ? classes : 1000, resolution, small_stem);
    } else if (!preset.empty() && !custom()) {
      spec = ModelSpec::caterpillar(preset, resolution);
    } else {
      spec.variant = "custom";
      const Index c = width > 0 ? width : 16;
      spec.base_width = c;
      spec.channels = {c, 2 * c, 4 * c, 8 * c};
      spec.depths = {1, 1, 1, 1};
      spec.input_h = spec.input_w = resolution;
    }
    if (!depths.empty()) std::copy(depths.begin(), depths.end(), spec.depths.begin());
    if (!channels.empty()) spec = spec.with_channels({channels[0], channels[1], channels[2], channels[3]});
    if (patch > 0) spec.patch_size = patch;
    if (!profile.empty()) spec = adapt_small_images(spec, DatasetProfile::named(profile));
    if (classes > 0) spec.num_classes = classes;
    if (ffn_ratio > 0) spec.block.ffn_ratio = ffn_ratio;
    if (!local_mixer.empty()) spec.block.local_mixer = parse_local_mixer(local_mixer);
    if (!combine.empty()) spec.block.combine = parse_combine(combine);
    if (!spc.empty()) spec.block.spc = SpcConfig::parse(spc, spec.block.spc);
    return spec;
  }
};

struct DataFlags {
  std::string source = "synth";
  std::vector<std::string> files;
  Index synth_n = 64;
  Index synth_hw = 16;
  Index synth_channels = 3;
  int synth_classes = 8;
  double synth_sigma = 0.1;
  std::uint64_t synth_seed = 0;
  std::vector<float> mean;
  std::vector<float> stddev;

  void add(CLI::App* app) {
    app->add_option("--data", source, "synth, cifar10, idx or raw")
        ->check(CLI::IsMember({"synth", "cifar10", "idx", "raw"}));
    app->add_option("--data-files", files, "input files (idx: images then labels)");
    app->add_option("--synth-n", synth_n, "synthetic sample count");
    app->add_option("--synth-hw", synth_hw, "synthetic image side");
    app->add_option("--synth-channels", synth_channels, "synthetic image channels");
    app->add_option("--synth-classes", synth_classes, "synthetic class count");
    app->add_option("--synth-sigma", synth_sigma, "synthetic noise level");
    app->add_option("--synth-seed", synth_seed, "synthetic data seed");
    app->add_option("--normalize-mean", mean, "per-channel mean (opt-in normalization)")->delimiter(',');
    app->add_option("--normalize-std", stddev, "per-channel std (opt-in normalization)")->delimiter(',');
  }

  LabeledImages load() const {
    LabeledImages data;
    if (source == "synth") {
      data = synth_blobs(synth_seed, synth_n, synth_hw, synth_hw, synth_channels, synth_classes, synth_sigma);
    } else if (source == "cifar10") {
      data = load_cifar10_binary(files);
    } else if (source == "idx") {
      if (files.size() != 2) throw ConfigError("--data idx needs --data-files <images> <labels>");
      data = load_idx(files[0], files[1]);
    } else {
      if (files.size() != 1) throw ConfigError("--data raw needs exactly one --data-files entry");
      data = load_raw_blob(files[0]);
    }
    if (!mean.empty() || !stddev.empty()) normalize(data, mean, stddev);
    return data;
  }
};

std::string with_commas(std::int64_t v) {
  std::string s = std::to_string(v);
  for (int k = static_cast<int>(s.size()) - 3; k > 0; k -= 3) s.insert(static_cast<std::size_t>(k), ",");
  return s;
}

std::string format(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

std::string cost_table_csv(const CostTable& rows) {
  std::string out = "layer,kind,output_shape,params,macs\n";
  for (const auto& r : rows)
    out += r.layer + "," + r.kind + "," + r.output.str() + "," + std::to_string(r.params) + "," +
           std::to_string(r.macs) + "\n";
  return out;
}

int cmd_paramcount(const SpecFlags& flags, const std::string& compare_local, bool table, const std::string& csv_path,
                   std::ostream& out, std::ostream& err) {
  const ModelSpec spec = flags.build();
  Model<float> model(spec, 0);
  const auto cost = estimate_cost(model, model.input_shape(1));
  out << "model: " << (spec.arch == Architecture::kCaterpillar ? "caterpillar" : "resnet18")
      << " variant=" << spec.variant << " input=" << spec.input_h << "x" << spec.input_w << "x" << spec.input_c
      << " classes=" << spec.num_classes << " ffn_ratio=" << spec.block.ffn_ratio << "\n";
  out << "stages:";
  for (const auto& s : spec.stages()) out << " [" << s.h << "x" << s.w << "," << s.c << "]";
  out << "\n";
  out << "params: " << with_commas(cost.params) << " (" << format("%.2f", cost.params / 1e6) << "M)\n";
  out << "macs: " << with_commas(cost.macs) << " (" << format("%.3f", cost.macs / 1e9)
      << "G, 1 MAC = one multiply-accumulate, batch 1)\n";
  const Index d = spec.channels[0];
  const auto conv = local_mixer_param_count(d, d, MixerKind::kConv, 3);
  const auto spc = local_mixer_param_count(d, d, MixerKind::kSpc, 3);
  const auto dw = local_mixer_param_count(d, d, MixerKind::kDwConv, 3);
  out << "local mixer closed forms (d=" << d << ", k=3, no bias): conv=" << conv << " spc=" << spc << " dwconv=" << dw
      << " conv/spc=" << format("%.6g", static_cast<double>(conv) / static_cast<double>(spc)) << "\n";
  if (!compare_local.empty()) {
    if (spec.arch != Architecture::kCaterpillar) throw ConfigError("--compare-local applies to Caterpillar specs");
    ModelSpec other = spec;
    other.block.local_mixer = parse_local_mixer(compare_local);
    Model<float> baseline(other, 0);
    const auto delta = cost.params - count_params(baseline);
    out << "delta params vs local_mixer=" << compare_local << ": " << with_commas(delta) << " ("
        << format("%.3f", delta / 1e6) << "M)\n";
  }
  if (table) out << cost_table_csv(cost.rows);
  if (!csv_path.empty()) write_file(csv_path, cost_table_csv(cost.rows));
  if (cost.params != cost.table_params) {
    err << "verification failed: enumerated params " << cost.params << " != per-layer closed forms "
        << cost.table_params << "\n";
    return kExitVerificationFailure;
  }
  return kExitOk;
}

int cmd_gradcheck(const GradSuiteOptions& options, std::ostream& out, std::ostream& err) {
  const auto cases = run_grad_suite(options);
  out << "target,config,max_rel_error,tolerance,worst,status\n";
  int failures = 0;
  for (const auto& c : cases) {
    out << c.target << ",\"" << c.config << "\"," << format("%.3e", c.max_relative_error) << ","
        << format("%.0e", c.tolerance) << "," << c.worst << "," << (c.passed ? "pass" : "FAIL") << "\n";
    if (!c.passed) ++failures;
  }
  out << cases.size() - static_cast<std::size_t>(failures) << "/" << cases.size() << " checks passed\n";
  if (failures == 0) return kExitOk;
  for (const auto& c : cases)
    if (!c.passed)
      err << "gradcheck failed: " << c.target << " [" << c.config << "] max_rel_error "
          << format("%.3e", c.max_relative_error) << " at " << c.worst << "\n";
  return kExitVerificationFailure;
}

int cmd_bench(const BenchOptions& options, const std::string& out_path, std::ostream& out, std::ostream& err) {
  const auto report = run_bench(options);
  const std::string csv = report.csv();
  out << csv;
  if (!out_path.empty()) write_file(out_path, csv);
  out << "# analytic MAC ratio conv3x3/spc(reduce_concat_fuse) at equal width: "
      << format("%.6g", conv_to_spc_mac_ratio(options.channels)) << "\n";
  bool ok = true;
  for (BenchOp op : options.ops) {
    const auto analytic = analytic_macs(op, options.channels, options.hw, options.hw, options.batch, options.spc);
    const auto estimate = estimated_macs(op, options);
    out << "# cross-check " << to_string(op) << ": analytic=" << analytic << " estimate=" << estimate
        << (analytic == estimate ? " ok" : " MISMATCH") << "\n";
    ok = ok && analytic == estimate;
  }
  if (!ok) {
    err << "verification failed: analytic MACs disagree with estimate_cost\n";
    return kExitVerificationFailure;
  }
  return kExitOk;
}

struct TrainFlags {
  TrainConfig cfg;
  std::string history;
  std::string checkpoint;
  Index checkpoint_every = 0;
  Index stop_after_perfect = 0;
  double require_accuracy = -1;
  std::string spec_out;
};

ModelSpec bind_to_data(ModelSpec spec, const SpecFlags& flags, const LabeledImages& data) {
  if (flags.spec_file.empty()) {
    spec.input_h = data.images.h();
    spec.input_w = data.images.w();
    spec.input_c = data.images.c();
    if (flags.classes == 0) spec.num_classes = data.class_count;
  }
  return spec;
}

int cmd_train(const SpecFlags& sflags, const DataFlags& dflags, const TrainFlags& t, std::ostream& out,
              std::ostream& err) {
  const LabeledImages data = dflags.load();
  SpecFlags local = sflags;
  if (local.spec_file.empty()) local.resolution = data.images.h();
  const ModelSpec spec = bind_to_data(local.build(), local, data);
  Model<float> model(spec, t.cfg.seed);
  if (!t.spec_out.empty()) write_file(t.spec_out, spec.str());
  TrainOptions options;
  options.checkpoint_every = t.checkpoint_every;
  options.stop_after_perfect = t.stop_after_perfect;
  if (t.checkpoint_every > 0) {
    if (t.checkpoint.empty()) throw ConfigError("--checkpoint-every needs --checkpoint");
    options.checkpoint_prefix = std::filesystem::path(t.checkpoint).replace_extension().string();
  }
  const auto history = train_loop(model, data, t.cfg, options);
  if (t.history.empty()) {
    out << history.csv();
  } else {
    write_file(t.history, history.csv());
  }
  for (const auto& ev : history.checkpoints)
    out << "checkpoint step=" << ev.step << " path=" << ev.path << " train_acc=" << format("%.17g", ev.train_accuracy)
        << "\n";
  if (!t.checkpoint.empty()) save_checkpoint(model, t.checkpoint);
  const double acc = evaluate(model, data, t.cfg.batch_size);
  out << "steps=" << history.rows.size() << " final_loss=" << format("%.6g", history.rows.back().loss)
      << " train_acc=" << format("%.17g", acc) << "\n";
  if (t.require_accuracy >= 0 && acc < t.require_accuracy) {
    err << "verification failed: train accuracy " << acc << " below " << t.require_accuracy << "\n";
    return kExitVerificationFailure;
  }
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint, const DataFlags& dflags, Index batch, std::ostream& out) {
  auto model = load_checkpoint<float>(checkpoint);
  const LabeledImages data = dflags.load();
  const double acc = evaluate(*model, data, batch);
  out << "top1=" << format("%.17g", acc) << "\n";
  return kExitOk;
}

int cmd_dump(const std::string& checkpoint, const DataFlags& dflags, Index index, const std::vector<int>& stages,
             const std::string& reduce, const std::string& out_dir, std::ostream& out) {
  auto model = load_checkpoint<float>(checkpoint);
  const LabeledImages data = dflags.load();
  const auto one = data.subset({index});
  const auto paths = dump_features(*model, one.images, stages, FeatureReduce::parse(reduce), out_dir);
  for (const auto& p : paths) out << p << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Caterpillar: SPC/sMLP vision-MLP toolkit"};
  app.require_subcommand(1);

  SpecFlags pc_spec;
  std::string compare_local;
  bool pc_table = false;
  std::string pc_csv;
  auto* paramcount = app.add_subcommand("paramcount", "parameter and MAC accounting");
  pc_spec.add(paramcount, true);
  paramcount->add_option("--compare-local", compare_local, "report the delta against another local mixer")
      ->check(CLI::IsMember({"spc", "dwconv", "identity"}));
  paramcount->add_flag("--table", pc_table, "print the per-layer CSV table");
  paramcount->add_option("--csv", pc_csv, "write the per-layer CSV table to a file");

  GradSuiteOptions gopts;
  std::string gconfig;
  auto* gradcheck = app.add_subcommand("gradcheck", "central-difference gradient checks");
  gradcheck->add_option("--target", gopts.target, "all or one target");
  gradcheck->add_option("--trials", gopts.trials, "seeds per fixture");
  gradcheck->add_option("--seed", gopts.seed, "first seed");
  gradcheck->add_option("--config", gconfig, "SPC settings for the spc and block targets");

  BenchOptions bopts;
  std::vector<std::string> bops{"spc", "conv3x3", "dwconv3x3"};
  std::string bdirection = "fwd";
  std::string bdtype = "f32";
  std::string bconfig;
  std::string bout;
  auto* bench = app.add_subcommand("bench", "operator throughput");
  bench->add_option("--op", bops, "spc, conv3x3, dwconv3x3 (comma list)")->delimiter(',');
  bench->add_option("--channels", bopts.channels, "input and output width");
  bench->add_option("--hw", bopts.hw, "square map side");
  bench->add_option("--batch", bopts.batch, "batch size");
  bench->add_option("--reps", bopts.reps, "timed repetitions");
  bench->add_option("--warmup", bopts.warmup, "untimed warmup repetitions");
  bench->add_option("--direction", bdirection, "fwd or fwd+bwd")->check(CLI::IsMember({"fwd", "fwd+bwd"}));
  bench->add_option("--dtype", bdtype, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}));
  bench->add_option("--config", bconfig, "SPC settings");
  bench->add_option("--seed", bopts.seed, "weight and input seed");
  bench->add_option("--out", bout, "also write the CSV report to a file");

  SpecFlags tr_spec;
  DataFlags tr_data;
  TrainFlags tflags;
  auto* train = app.add_subcommand("train", "train a model");
  tr_spec.add(train, false);
  tr_data.add(train);
  train->add_option("--lr", tflags.cfg.lr_peak, "peak learning rate");
  train->add_option("--lr-min", tflags.cfg.lr_min, "final learning rate");
  train->add_option("--warmup-lr", tflags.cfg.warmup_lr, "initial warmup learning rate");
  train->add_option("--warmup-steps", tflags.cfg.warmup_steps, "linear warmup steps");
  train->add_option("--steps", tflags.cfg.total_steps, "optimizer steps");
  train->add_option("--weight-decay", tflags.cfg.weight_decay, "decoupled weight decay");
  train->add_option("--label-smoothing", tflags.cfg.label_smoothing, "label smoothing");
  train->add_option("--batch-size", tflags.cfg.batch_size, "minibatch size");
  train->add_option("--seed", tflags.cfg.seed, "initialization and shuffle seed");
  train->add_option("--history", tflags.history, "history CSV path (default stdout)");
  train->add_option("--checkpoint", tflags.checkpoint, "final checkpoint path");
  train->add_option("--checkpoint-every", tflags.checkpoint_every, "also save every k steps");
  train->add_option("--stop-after-perfect", tflags.stop_after_perfect,
                    "stop after this many consecutive 100%-accuracy batches");
  train->add_option("--require-accuracy", tflags.require_accuracy, "exit 1 if final train accuracy is lower");
  train->add_option("--spec-out", tflags.spec_out, "write the ModelSpec used");

  std::string ev_ckpt;
  DataFlags ev_data;
  Index ev_batch = 64;
  auto* eval = app.add_subcommand("eval", "top-1 accuracy of a checkpoint");
  eval->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required();
  ev_data.add(eval);
  eval->add_option("--batch-size", ev_batch, "evaluation batch size");

  std::string df_ckpt;
  DataFlags df_data;
  Index df_index = 0;
  std::vector<int> df_stages{1};
  std::string df_reduce = "mean";
  std::string df_out = ".";
  auto* dump = app.add_subcommand("dump-features", "write stage feature maps as PGM images");
  dump->add_option("--checkpoint", df_ckpt, "checkpoint file")->required();
  df_data.add(dump);
  dump->add_option("--index", df_index, "sample index");
  dump->add_option("--stage", df_stages, "stages (comma list)")->delimiter(',');
  dump->add_option("--reduce", df_reduce, "mean or channel:<i>");
  dump->add_option("--out-dir", df_out, "output directory");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (paramcount->parsed()) return cmd_paramcount(pc_spec, compare_local, pc_table, pc_csv, out, err);
    if (gradcheck->parsed()) {
      if (!gconfig.empty()) gopts.spc = SpcConfig::parse(gconfig);
      return cmd_gradcheck(gopts, out, err);
    }
    if (bench->parsed()) {
      bopts.ops.clear();
      for (const auto& o : bops) bopts.ops.push_back(parse_bench_op(o));
      bopts.backward = bdirection == "fwd+bwd";
      bopts.f64 = bdtype == "f64";
      if (!bconfig.empty()) bopts.spc = SpcConfig::parse(bconfig);
      return cmd_bench(bopts, bout, out, err);
    }
    if (train->parsed()) return cmd_train(tr_spec, tr_data, tflags, out, err);
    if (eval->parsed()) return cmd_eval(ev_ckpt, ev_data, ev_batch, out);
    if (dump->parsed()) return cmd_dump(df_ckpt, df_data, df_index, df_stages, df_reduce, df_out, out);
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kExitVerificationFailure;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitVerificationFailure;
  }
  return kExitUsage;
}

}  // namespace caterpillar
