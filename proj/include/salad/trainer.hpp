// Copyright (C) 2026 The salad authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "salad/adam.hpp"
#include "salad/assignment.hpp"
#include "salad/checkpoint.hpp"
#include "salad/dataset.hpp"
#include "salad/evaluation.hpp"
#include "salad/inference.hpp"
#include "salad/loss.hpp"
#include "salad/model.hpp"

namespace salad {

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t pretrain_epochs = 10;  // classification head + encoder only
  std::size_t batch_size = 4;
  double learning_rate = 1e-4;
  LossWeights weights;
  SelfAssessVariant self_assessment = SelfAssessVariant::Salad;
  PruningVariant pruning = PruningVariant::Salad;
  ClassLoss class_loss = ClassLoss::PerClassBinary;
  bool batch_mean = false;  // average instead of sum over the videos of a batch
  double grad_clip = 0.0;   // global-norm threshold; 0 disables clipping
  double train_fraction = 0.8;
  std::size_t eval_every = 1;  // validation period in epochs; 0 disables
  std::vector<double> eval_thresholds{0.1, 0.2, 0.3, 0.4, 0.5};
  InferenceConfig inference;
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0 = worker_count()

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based, pre-training epochs included
  std::string phase;      // "pretrain" or "joint"
  std::uint64_t step = 0;
  double train_loss = 0.0;
  double loss_rsa = 0.0;
  double loss_cls = 0.0;
  std::size_t sum_y = 0;
  double pruned_fraction = 0.0;  // in-instance frames with an all-zero alpha row
  std::vector<std::pair<double, double>> val_map;  // (threshold, mAP)

  std::string to_json() const;
  std::optional<double> map_at(double threshold) const;
};

struct TrainOptions {
  std::optional<Checkpoint> resume;                   // continue from here
  bool reset_optimizer = false;                       // resume with fresh Adam moments
  std::map<std::string, BinaryMatrix> frozen_alpha;  // required for PruningVariant::Frozen
  std::string run_config;                             // echoed into checkpoints
  std::function<void(const EpochRecord&, const ParamSet&)> on_epoch;
};

struct TrainResult {
  Checkpoint final_checkpoint;
  Checkpoint best_checkpoint;
  double best_map = -1.0;  // mAP at best_threshold
  double best_threshold = 0.5;
  std::vector<EpochRecord> log;
  EvalReport final_report;  // validation report of the final parameters
};

// Splits the dataset train/validation by index, optionally pre-trains the
// classification branch, then optimises the joint loss with the assignment
// recomputed from the current outputs for every video of every batch.
// Throws NumericError on a non-finite loss.
TrainResult train(const Dataset& dataset, const ModelConfig& model_cfg, const TrainConfig& cfg,
                  const TrainOptions& opts = {});

// Per-frame predictions of one video under the given parameters.
std::vector<FramePrediction> predict(const ModelConfig& cfg, const ParamSet& params, const VideoSample& video);

VideoDetections detect_videos(const ModelConfig& cfg, const ParamSet& params, std::span<const VideoSample> videos,
                              const InferenceConfig& inference, std::size_t threads = 1);

EvalReport evaluate(const ModelConfig& cfg, const ParamSet& params, std::span<const VideoSample> videos,
                    const InferenceConfig& inference, std::span<const double> thresholds, std::size_t num_classes,
                    std::size_t threads = 1);

// Alpha of the self-assessment assignment under the given parameters, one
// matrix per video.
std::map<std::string, BinaryMatrix> capture_alpha(const ModelConfig& cfg, const ParamSet& params,
                                                  std::span<const VideoSample> videos, double mu,
                                                  std::size_t threads = 1);

enum class AblationSuite { Pruning, SelfAssessment, Fusion };
std::string_view to_string(AblationSuite s);
AblationSuite parse_ablation_suite(std::string_view name);

struct AblationRow {
  std::string label;
  std::vector<std::vector<double>> map_per_seed;  // [seed][threshold]
  std::vector<double> mean;
  std::vector<double> stddev;
};

struct AblationTable {
  AblationSuite suite = AblationSuite::Pruning;
  std::vector<double> thresholds;
  std::vector<std::uint64_t> seeds;
  std::vector<AblationRow> rows;
  std::size_t training_runs = 0;

  const AblationRow& row(std::string_view label) const;
  double mean_at(std::string_view label, double threshold) const;
  std::string table() const;
  std::string csv() const;
};

struct AblationOptions {
  std::size_t threads = 0;  // parallel training runs; 0 = worker_count()
  // Fusion suite only: rescore this model instead of training one per seed.
  std::optional<Checkpoint> checkpoint;
  std::function<void(const std::string&)> progress;
};

// Pruning: No Pruning, Top 1 IoU, Random, Frozen, SALAD (pruning).
// Self-assessment: the three alternative confidence targets and SALAD.
// Fusion: the three fusion rules and SALAD (regression score only).
// Scores are validation mAP of the final parameters.
AblationTable run_ablation(const Dataset& dataset, const ModelConfig& model_cfg, const TrainConfig& cfg,
                           AblationSuite suite, std::span<const std::uint64_t> seeds,
                           const AblationOptions& opts = {});

}  // namespace salad
