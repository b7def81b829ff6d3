// Copyright (C) 2026 The salad authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "salad/checkpoint.hpp"
#include "salad/error.hpp"
#include "salad/trainer.hpp"

using namespace salad;

namespace {

Dataset tiny_dataset(std::uint64_t seed = 5, std::size_t videos = 6) {
  SynthConfig c;
  c.num_videos = videos;
  c.min_frames = c.max_frames = 24;
  c.feature_dim = 4;
  c.num_classes = 2;
  c.min_instances = 1;
  c.max_instances = 2;
  c.min_duration = 4;
  c.max_duration = 8;
  c.seed = seed;
  return generate_synthetic(c);
}

ModelConfig tiny_model() { return {4, 6, 2, 8, 6, 3}; }

TrainConfig tiny_train() {
  TrainConfig t;
  t.epochs = 2;
  t.pretrain_epochs = 1;
  t.batch_size = 2;
  t.learning_rate = 1e-3;
  t.seed = 9;
  t.threads = 1;
  return t;
}

std::string log_text(const TrainResult& r) {
  std::string s;
  for (const auto& e : r.log) s += e.to_json() + "\n";
  return s;
}

std::string bytes_of(const Checkpoint& c) {
  std::ostringstream os;
  write_checkpoint(os, c);
  return os.str();
}

}  // namespace

TEST_CASE("train config validation") {
  auto t = tiny_train();
  CHECK_NOTHROW(t.validate());
  t.batch_size = 0;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t = tiny_train();
  t.learning_rate = 0;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t = tiny_train();
  t.eval_thresholds = {0.0};
  CHECK_THROWS_AS(t.validate(), ConfigError);
}

TEST_CASE("model and dataset must agree") {
  auto m = tiny_model();
  m.num_classes = 3;
  CHECK_THROWS_AS(train(tiny_dataset(), m, tiny_train()), ConfigError);
}

TEST_CASE("same seed gives identical logs and checkpoints, regardless of thread count") {
  const auto ds = tiny_dataset();
  auto cfg = tiny_train();
  const auto a = train(ds, tiny_model(), cfg);
  const auto b = train(ds, tiny_model(), cfg);
  CHECK(log_text(a) == log_text(b));
  CHECK(bytes_of(a.final_checkpoint) == bytes_of(b.final_checkpoint));
  cfg.threads = 3;
  const auto c = train(ds, tiny_model(), cfg);
  CHECK(log_text(a) == log_text(c));
  CHECK(a.final_checkpoint.params == c.final_checkpoint.params);
  CHECK(a.log.size() == 3);
  CHECK(a.log[0].phase == "pretrain");
  CHECK(a.log[2].phase == "joint");
  CHECK(a.log[2].step == 9);  // five training videos, batches of two
}

TEST_CASE("pre-training leaves the regression and scoring heads untouched") {
  const auto ds = tiny_dataset();
  auto cfg = tiny_train();
  cfg.pretrain_epochs = 2;
  cfg.epochs = 0;
  const auto init = init_params(tiny_model());
  const auto r = train(ds, tiny_model(), cfg);
  const auto& p = r.final_checkpoint.params;
  bool encoder_moved = false, cls_moved = false;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto g = group_of(p.name(i));
    if (g == ParamGroup::Regression || g == ParamGroup::Scoring) CHECK(p[i] == init[i]);
    if (g == ParamGroup::Encoder && !(p[i] == init[i])) encoder_moved = true;
    if (g == ParamGroup::Classification && !(p[i] == init[i])) cls_moved = true;
  }
  CHECK(encoder_moved);
  CHECK(cls_moved);
  CHECK(r.log.back().loss_rsa == 0.0);
}

TEST_CASE("zero joint epochs returns the pre-trained checkpoint") {
  const auto ds = tiny_dataset();
  auto cfg = tiny_train();
  cfg.epochs = 0;
  const auto pre = train(ds, tiny_model(), cfg);
  auto longer = tiny_train();
  longer.epochs = 1;
  std::optional<ParamSet> after_pretrain;
  TrainOptions o;
  o.on_epoch = [&](const EpochRecord& rec, const ParamSet& p) {
    if (rec.epoch == 1) after_pretrain = p;
  };
  train(ds, tiny_model(), longer, o);
  REQUIRE(after_pretrain);
  CHECK(pre.final_checkpoint.params == *after_pretrain);
}

TEST_CASE("sum of y in the log matches a direct recomputation") {
  const auto ds = tiny_dataset(7, 5);
  auto cfg = tiny_train();
  cfg.batch_size = 4;  // the four training videos form one batch
  cfg.pretrain_epochs = 0;
  cfg.epochs = 3;
  auto train_set = split_dataset(ds, cfg.train_fraction).first;
  REQUIRE(train_set.videos.size() == 4);
  std::vector<ParamSet> seen{init_params(tiny_model())};
  TrainOptions o;
  o.on_epoch = [&](const EpochRecord&, const ParamSet& p) { seen.push_back(p); };
  const auto r = train(ds, tiny_model(), cfg, o);
  for (std::size_t e = 0; e < r.log.size(); ++e) {
    std::size_t direct = 0;
    for (const auto& v : train_set.videos) {
      direct += assign_salad(predict(tiny_model(), seen[e], v), v.ground_truth, cfg.weights.mu).positives();
    }
    CHECK(r.log[e].sum_y == direct);
    CHECK(r.log[e].pruned_fraction >= 0.0);
    CHECK(r.log[e].pruned_fraction <= 1.0);
  }
}

TEST_CASE("non-finite loss aborts with coordinates") {
  auto ds = tiny_dataset();
  ds.videos[1].features(3, 2) = std::numeric_limits<double>::quiet_NaN();
  auto cfg = tiny_train();
  cfg.train_fraction = 1.0;
  try {
    train(ds, tiny_model(), cfg);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("epoch 1") != std::string::npos);
    CHECK(msg.find("video_1") != std::string::npos);
  }
}

TEST_CASE("resuming from a checkpoint reproduces an uninterrupted run") {
  const auto ds = tiny_dataset();
  auto cfg = tiny_train();
  const auto full = train(ds, tiny_model(), cfg);

  auto first = tiny_train();
  first.epochs = 1;
  const auto part = train(ds, tiny_model(), first);
  std::stringstream ss;
  write_checkpoint(ss, part.final_checkpoint);
  TrainOptions o;
  o.resume = read_checkpoint(ss);
  const auto rest = train(ds, tiny_model(), cfg, o);
  REQUIRE(rest.log.size() == 1);
  CHECK(rest.log[0].to_json() == full.log.back().to_json());
  CHECK(rest.final_checkpoint.params == full.final_checkpoint.params);
  CHECK(rest.final_checkpoint.step == full.final_checkpoint.step);

  o.reset_optimizer = true;
  const auto reset = train(ds, tiny_model(), cfg, o);
  CHECK(reset.final_checkpoint.step == full.final_checkpoint.step);
  CHECK(!(reset.final_checkpoint.params == full.final_checkpoint.params));
}

TEST_CASE("every strategy trains end to end") {
  const auto ds = tiny_dataset();
  const auto salad_run = train(ds, tiny_model(), tiny_train());
  const auto train_set = split_dataset(ds, 0.8).first;
  for (auto pv : {PruningVariant::NoPruning, PruningVariant::Top1IoU, PruningVariant::Random, PruningVariant::Frozen}) {
    auto cfg = tiny_train();
    cfg.pruning = pv;
    TrainOptions o;
    if (pv == PruningVariant::Frozen) {
      CHECK_THROWS_AS(train(ds, tiny_model(), cfg), InvalidArgument);
      o.frozen_alpha = capture_alpha(tiny_model(), salad_run.final_checkpoint.params, train_set.videos, 0.5);
    }
    const auto r = train(ds, tiny_model(), cfg, o);
    CHECK(std::isfinite(r.log.back().train_loss));
  }
  for (auto sv : {SelfAssessVariant::TopConfidence, SelfAssessVariant::ConfidenceThreshold,
                  SelfAssessVariant::IoUThreshold}) {
    auto cfg = tiny_train();
    cfg.self_assessment = sv;
    CHECK(std::isfinite(train(ds, tiny_model(), cfg).log.back().train_loss));
  }
  auto cfg = tiny_train();
  cfg.class_loss = ClassLoss::Categorical;
  cfg.batch_mean = true;
  cfg.grad_clip = 5.0;
  CHECK(std::isfinite(train(ds, tiny_model(), cfg).log.back().train_loss));
}

TEST_CASE("ablation suites: row sets, run counts, checkpoint reuse") {
  const auto ds = tiny_dataset();
  auto cfg = tiny_train();
  cfg.epochs = 1;
  const std::vector<std::uint64_t> seeds{1, 2};
  AblationOptions opts;
  opts.threads = 1;

  const auto pr = run_ablation(ds, tiny_model(), cfg, AblationSuite::Pruning, seeds, opts);
  REQUIRE(pr.rows.size() == 5);
  CHECK(pr.rows[0].label == "No Pruning");
  CHECK(pr.rows[1].label == "Top 1 IoU");
  CHECK(pr.rows[2].label == "Random");
  CHECK(pr.rows[3].label == "Frozen");
  CHECK(pr.rows[4].label == "SALAD (pruning)");
  CHECK(pr.training_runs == 10);
  for (const auto& r : pr.rows) {
    CHECK(r.map_per_seed.size() == 2);
    CHECK(r.mean.size() == cfg.eval_thresholds.size());
  }

  const auto sa = run_ablation(ds, tiny_model(), cfg, AblationSuite::SelfAssessment, seeds, opts);
  CHECK(sa.rows.size() == 4);
  CHECK(sa.training_runs == 8);

  Checkpoint ckpt;
  ckpt.model = tiny_model();
  ckpt.params = init_params(tiny_model());
  opts.checkpoint = ckpt;
  const auto fu = run_ablation(ds, tiny_model(), cfg, AblationSuite::Fusion, seeds, opts);
  CHECK(fu.rows.size() == 4);
  CHECK(fu.training_runs == 0);
  CHECK(fu.table().find("Normalized product") != std::string::npos);
  CHECK(fu.csv().rfind("variant,seed,threshold,map\n", 0) == 0);
  // Rescoring a checkpoint needs no seeds; training does.
  const auto fu_ckpt = run_ablation(ds, tiny_model(), cfg, AblationSuite::Fusion, {}, opts);
  CHECK(fu_ckpt.seeds == std::vector<std::uint64_t>{tiny_model().seed});
  CHECK(fu_ckpt.mean_at("SALAD", 0.5) == fu.mean_at("SALAD", 0.5));
  CHECK_THROWS_AS(run_ablation(ds, tiny_model(), cfg, AblationSuite::Pruning, {}, {}), ConfigError);

  CHECK_THROWS_AS(parse_ablation_suite("bogus"), InvalidArgument);
  CHECK(parse_ablation_suite("self_assessment") == AblationSuite::SelfAssessment);
}
