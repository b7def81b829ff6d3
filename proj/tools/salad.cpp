// Copyright (C) 2026 The salad authors
// SPDX-License-Identifier: Apache-2.0
//
// salad: data generation, training, evaluation, inference and ablations.
// Exit codes: 0 success, 2 configuration or validation, 3 numeric failure,
// 4 file IO.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "salad/config.hpp"
#include "salad/dataset.hpp"
#include "salad/error.hpp"
#include "salad/evaluation.hpp"
#include "salad/parallel.hpp"
#include "salad/trainer.hpp"

namespace fs = std::filesystem;
using namespace salad;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::vector<VideoSample> select_split(const Dataset& ds, const std::string& split, double train_fraction) {
  if (split == "all") return ds.videos;
  auto [train, val] = split_dataset(ds, train_fraction);
  if (split == "train") return train.videos;
  if (split == "val") return val.videos;
  throw ConfigError("split", "must be one of train, val, all");
}

std::vector<double> resolve_thresholds(const std::string& preset, const std::vector<double>& explicit_list,
                                       const std::vector<double>& fallback) {
  if (!preset.empty() && !explicit_list.empty()) throw ConfigError("thresholds", "give --preset or --thresholds");
  if (!preset.empty()) {
    try {
      return threshold_preset(preset);
    } catch (const InvalidArgument& e) {
      throw ConfigError("preset", e.what());
    }
  }
  if (!explicit_list.empty()) {
    for (double t : explicit_list) {
      if (!(t > 0.0 && t <= 1.0)) throw ConfigError("thresholds", "every threshold must lie in (0, 1]");
    }
    return explicit_list;
  }
  return fallback;
}

// Run configuration to use with a stored model: the explicit file if given,
// else the echo inside the checkpoint.
RunConfig config_for_checkpoint(const std::string& config_path, const std::vector<std::string>& overrides,
                                const Checkpoint& ckpt) {
  if (!config_path.empty()) return load_run_config(config_path, overrides);
  if (!ckpt.run_config.empty()) return parse_run_config(ckpt.run_config, overrides);
  return parse_run_config("{}", overrides);
}

// Parameters of a checkpoint checked against the layout the run config and
// dataset imply.
ParamSet checked_params(const Checkpoint& ckpt, const RunConfig& rc, const Dataset& ds, bool config_given,
                        ModelConfig& model) {
  model = ckpt.model;
  model.feature_dim = ds.feature_dim;
  model.num_classes = ds.num_classes;
  if (config_given) {
    model.hidden_dim = rc.model.hidden_dim;
    model.head_width1 = rc.model.head_width1;
    model.head_width2 = rc.model.head_width2;
  }
  try {
    return restore_params(ckpt, model);
  } catch (const InvalidArgument& e) {
    throw ConfigError("checkpoint", e.what());
  }
}

struct Common {
  std::string config;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c, bool config_required) {
  auto* opt = cmd->add_option("-c,--config", c.config, "JSON run configuration");
  if (config_required) opt->required();
  opt->check(CLI::ExistingFile);
  cmd->add_option("--set", c.overrides, "Override a config value, e.g. train.epochs=5")->take_all();
}

int cmd_gen_data(const Common& common, const std::string& out) {
  const RunConfig rc = load_run_config(common.config, common.overrides);
  const Dataset ds = generate_synthetic(rc.synth_config());
  save_dataset(ds, out);

  std::map<int, std::size_t> histogram;
  for (const auto& v : ds.videos) {
    for (const auto& g : v.ground_truth.instances) ++histogram[g.class_id];
  }
  std::cout << "wrote " << out << ": " << ds.videos.size() << " videos, " << ds.num_instances() << " instances\n";
  for (const auto& [cls, n] : histogram) {
    std::cout << "  class " << cls << " (" << ds.class_names.at(static_cast<std::size_t>(cls - 1)) << "): " << n
              << "\n";
  }
  return 0;
}

struct TrainArgs {
  std::string data;
  std::string out_dir;
  std::string strategy;
  std::string resume;
  bool reset_optimizer = false;
};

int cmd_train(Common common, const TrainArgs& a) {
  if (!a.strategy.empty()) common.overrides.push_back("train.pruning=\"" + a.strategy + "\"");
  const RunConfig rc = load_run_config(common.config, common.overrides);
  const TrainConfig tc = rc.train_config();
  const Dataset ds = load_dataset(a.data);
  const ModelConfig mc = rc.model_config(ds);

  TrainOptions opts;
  opts.run_config = rc.to_json();
  opts.reset_optimizer = a.reset_optimizer;
  if (!a.resume.empty()) opts.resume = load_checkpoint(a.resume);
  if (tc.pruning == PruningVariant::Frozen) {
    if (!opts.resume || opts.resume->frozen_alpha.empty()) {
      throw ConfigError("train.pruning", "frozen needs --resume with a checkpoint carrying frozen alpha");
    }
    opts.frozen_alpha = opts.resume->frozen_alpha;
  }

  const fs::path dir(a.out_dir);
  ensure_dir(dir);
  write_text(dir / "config.json", opts.run_config);
  std::ofstream log(dir / "metrics.jsonl", std::ios::binary);
  if (!log) throw IoError("cannot write " + (dir / "metrics.jsonl").string());
  opts.on_epoch = [&](const EpochRecord& rec, const ParamSet&) {
    log << rec.to_json() << "\n";
    log.flush();
    std::cerr << "epoch " << rec.epoch << " [" << rec.phase << "] loss " << rec.train_loss;
    if (!rec.val_map.empty()) {
      if (auto m = rec.map_at(0.5)) std::cerr << " mAP@0.5 " << *m;
    }
    std::cerr << "\n";
  };

  const TrainResult res = train(ds, mc, tc, opts);
  save_checkpoint(res.final_checkpoint, dir / "final.ckpt");
  save_checkpoint(res.best_checkpoint, dir / "best.ckpt");
  if (!res.final_report.results.empty()) write_text(dir / "final_report.csv", res.final_report.csv());
  std::cout << "wrote " << (dir / "final.ckpt").string() << " and " << (dir / "best.ckpt").string()
            << " (best mAP@" << res.best_threshold << " = " << res.best_map << ")\n";
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string proposals;
  std::string data;
  std::string split;
  std::string preset;
  std::vector<double> thresholds;
  std::string out_dir;
  std::string format = "table";
};

int cmd_eval(const Common& common, const EvalArgs& a) {
  const Dataset ds = load_dataset(a.data);
  EvalReport report;
  std::string echo;
  if (!a.proposals.empty()) {
    const RunConfig rc = common.config.empty() ? parse_run_config("{}", common.overrides)
                                               : load_run_config(common.config, common.overrides);
    const auto thresholds = resolve_thresholds(a.preset, a.thresholds, rc.eval_thresholds);
    const auto videos = select_split(ds, a.split.empty() ? "all" : a.split, rc.train.train_fraction);
    VideoGroundTruth gts;
    for (const auto& v : videos) gts[v.video_id] = v.ground_truth;
    report = map_at_thresholds(load_proposals(a.proposals), gts, thresholds, ds.num_classes);
    echo = rc.to_json();
  } else {
    const Checkpoint ckpt = load_checkpoint(a.checkpoint);
    const RunConfig rc = config_for_checkpoint(common.config, common.overrides, ckpt);
    ModelConfig mc;
    const ParamSet params = checked_params(ckpt, rc, ds, !common.config.empty(), mc);
    const auto thresholds = resolve_thresholds(a.preset, a.thresholds, rc.eval_thresholds);
    const auto videos = select_split(ds, a.split.empty() ? "val" : a.split, rc.train.train_fraction);
    report = evaluate(mc, params, videos, rc.inference, thresholds, ds.num_classes, worker_count());
    echo = rc.to_json();
  }
  if (!a.out_dir.empty()) {
    const fs::path dir(a.out_dir);
    ensure_dir(dir);
    write_text(dir / "report.txt", report.table());
    write_text(dir / "report.csv", report.csv());
    write_text(dir / "config.json", echo);
  }
  std::cout << (a.format == "csv" ? report.csv() : report.table());
  return 0;
}

struct InferArgs {
  std::string checkpoint;
  std::string data;
  std::string split = "all";
  std::string out;
};

int cmd_infer(const Common& common, const InferArgs& a) {
  const Dataset ds = load_dataset(a.data);
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const RunConfig rc = config_for_checkpoint(common.config, common.overrides, ckpt);
  ModelConfig mc;
  const ParamSet params = checked_params(ckpt, rc, ds, !common.config.empty(), mc);
  const auto videos = select_split(ds, a.split, rc.train.train_fraction);
  const auto dets = detect_videos(mc, params, videos, rc.inference, worker_count());
  save_proposals(dets, a.out);
  std::size_t n = 0;
  for (const auto& [_, props] : dets) n += props.size();
  std::cout << "wrote " << a.out << ": " << n << " proposals for " << dets.size() << " videos\n";
  return 0;
}

struct AblateArgs {
  std::string data;
  std::string suite;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::string checkpoint;
  std::string out_dir;
  std::string format = "table";
};

int cmd_ablate(const Common& common, const AblateArgs& a) {
  AblationSuite suite;
  try {
    suite = parse_ablation_suite(a.suite);
  } catch (const InvalidArgument& e) {
    throw ConfigError("suite", e.what());
  }
  const RunConfig rc = load_run_config(common.config, common.overrides);
  TrainConfig tc = rc.train;
  tc.inference = rc.inference;
  tc.eval_thresholds = rc.eval_thresholds;
  const Dataset ds = load_dataset(a.data);
  ModelConfig mc = rc.model;
  mc.feature_dim = ds.feature_dim;
  mc.num_classes = ds.num_classes;
  mc.validate();

  AblationOptions opts;
  if (!a.checkpoint.empty()) {
    if (suite != AblationSuite::Fusion) throw ConfigError("checkpoint", "only the fusion suite reuses a checkpoint");
    Checkpoint ckpt = load_checkpoint(a.checkpoint);
    ModelConfig expected = ckpt.model;
    expected.feature_dim = ds.feature_dim;
    expected.num_classes = ds.num_classes;
    try {
      restore_params(ckpt, expected);
    } catch (const InvalidArgument& e) {
      throw ConfigError("checkpoint", e.what());
    }
    opts.checkpoint = std::move(ckpt);
  }
  opts.progress = [](const std::string& msg) { std::cerr << msg << "\n"; };

  const AblationTable table = run_ablation(ds, mc, tc, suite, a.seeds, opts);
  if (!a.out_dir.empty()) {
    const fs::path dir(a.out_dir);
    ensure_dir(dir);
    write_text(dir / "ablation.txt", table.table());
    write_text(dir / "ablation.csv", table.csv());
    write_text(dir / "config.json", rc.to_json());
  }
  std::cout << (a.format == "csv" ? table.csv() : table.table());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal action detection with self-assessed label assignment"};
  app.require_subcommand(1);

  Common common;

  std::string gen_out;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  add_common(gen, common, true);
  gen->add_option("-o,--out", gen_out, "Output dataset file")->required();

  TrainArgs targs;
  auto* tr = app.add_subcommand("train", "Train a model");
  add_common(tr, common, true);
  tr->add_option("-d,--data", targs.data, "Dataset file")->required()->check(CLI::ExistingFile);
  tr->add_option("-o,--out", targs.out_dir, "Output directory")->required();
  tr->add_option("--strategy", targs.strategy, "Pruning variant (salad, no_pruning, top1iou, random, frozen)");
  tr->add_option("--resume", targs.resume, "Continue from this checkpoint")->check(CLI::ExistingFile);
  tr->add_flag("--reset-optimizer", targs.reset_optimizer, "Start with fresh Adam moments when resuming");

  EvalArgs eargs;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint or a proposal file");
  add_common(ev, common, false);
  auto* ck = ev->add_option("--checkpoint", eargs.checkpoint, "Model checkpoint")->check(CLI::ExistingFile);
  auto* pr = ev->add_option("--proposals", eargs.proposals, "Proposal CSV to score directly")->check(CLI::ExistingFile);
  ck->excludes(pr);
  ev->add_option("-d,--data", eargs.data, "Dataset file with ground truth")->required()->check(CLI::ExistingFile);
  ev->add_option("--split", eargs.split, "train, val or all (default val, all for proposals)");
  ev->add_option("--preset", eargs.preset, "Threshold preset: thumos or anet");
  ev->add_option("--thresholds", eargs.thresholds, "Explicit tIoU thresholds")->delimiter(',');
  ev->add_option("-o,--out", eargs.out_dir, "Write report.txt, report.csv and config.json here");
  ev->add_option("--format", eargs.format, "Console format")->check(CLI::IsMember({"table", "csv"}));

  InferArgs iargs;
  auto* inf = app.add_subcommand("infer", "Write detections of a checkpoint as proposal CSV");
  add_common(inf, common, false);
  inf->add_option("--checkpoint", iargs.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
  inf->add_option("-d,--data", iargs.data, "Dataset file")->required()->check(CLI::ExistingFile);
  inf->add_option("--split", iargs.split, "train, val or all");
  inf->add_option("-o,--out", iargs.out, "Output CSV")->required();

  AblateArgs aargs;
  auto* ab = app.add_subcommand("ablate", "Run an ablation suite");
  add_common(ab, common, true);
  ab->add_option("-d,--data", aargs.data, "Dataset file")->required()->check(CLI::ExistingFile);
  ab->add_option("--suite", aargs.suite, "pruning, self_assessment or fusion")->required();
  ab->add_option("--seeds", aargs.seeds, "Comma-separated seeds")->delimiter(',');
  ab->add_option("--checkpoint", aargs.checkpoint, "Fusion suite: rescore this model")->check(CLI::ExistingFile);
  ab->add_option("-o,--out", aargs.out_dir, "Write ablation.txt, ablation.csv and config.json here");
  ab->add_option("--format", aargs.format, "Console format")->check(CLI::IsMember({"table", "csv"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen) return cmd_gen_data(common, gen_out);
    if (*tr) return cmd_train(common, targs);
    if (*ev) {
      if (eargs.checkpoint.empty() && eargs.proposals.empty()) {
        throw ConfigError("checkpoint", "eval needs --checkpoint or --proposals");
      }
      return cmd_eval(common, eargs);
    }
    if (*inf) return cmd_infer(common, iargs);
    if (*ab) return cmd_ablate(common, aargs);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitConfig;
}
