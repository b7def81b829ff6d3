// Copyright (C) 2026 The salad authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "salad/assignment.hpp"
#include "salad/inference.hpp"

namespace salad {

using VideoDetections = std::map<std::string, std::vector<Proposal>>;
using VideoGroundTruth = std::map<std::string, GroundTruthSet>;

// Greedy matching within one video. Detections are visited by decreasing
// score; each takes the unmatched same-class instance with the highest tIoU
// if that tIoU >= thresh. Result is indexed like `dets`.
std::vector<bool> match_detections(std::span<const Proposal> dets, const GroundTruthSet& gts, double thresh);

// Uninterpolated all-point AP: mean over ground truths of the precision at
// the rank where each is recovered. 0 when n_gt == 0.
double average_precision(const std::vector<bool>& flags, std::span<const double> scores, long n_gt);

struct ClassResult {
  int class_id = 0;
  std::size_t num_gt = 0;
  std::size_t num_tp = 0;
  std::size_t num_fp = 0;
  double ap = 0.0;
};

struct ThresholdResult {
  double threshold = 0.0;
  double map = 0.0;
  std::vector<ClassResult> classes;
};

struct EvalReport {
  std::vector<ThresholdResult> results;

  // Throws InvalidArgument if the threshold was not evaluated.
  double map_at(double threshold) const;
  std::string table() const;
  std::string csv() const;
};

// {0.1, ..., 0.5} for "thumos", {0.5, 0.75, 0.95} for "anet".
std::vector<double> threshold_preset(std::string_view name);

// Pools detections of all videos per class. Classes 1..num_classes are
// reported; those without ground truth do not enter the mean. With
// num_classes == 0 the class set is inferred from the inputs. Detections for a
// video missing from `gts` are an error.
EvalReport map_at_thresholds(const VideoDetections& dets, const VideoGroundTruth& gts,
                             std::span<const double> thresholds, std::size_t num_classes = 0);

}  // namespace salad
