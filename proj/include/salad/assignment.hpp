// Copyright (C) 2026 The salad authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "salad/interval.hpp"

namespace salad {

// Output of the network at one frame. class_dist[0] is the background class.
struct FramePrediction {
  double t = 0.0;
  Interval interval;
  double p_hat = 0.0;
  std::vector<double> class_dist;

  // Throws InvalidArgument if the anchor is outside the interval, p_hat is
  // not a probability or class_dist is not a distribution.
  void validate() const;
};

struct GroundTruth {
  Interval segment;
  int class_id = 1;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct GroundTruthSet {
  std::vector<GroundTruth> instances;
  double video_length = 1.0;

  std::size_t size() const noexcept { return instances.size(); }
  void validate() const;

  friend bool operator==(const GroundTruthSet&, const GroundTruthSet&) = default;
};

// Dense row-major 0/1 matrix.
class BinaryMatrix {
 public:
  BinaryMatrix() = default;
  BinaryMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c] != 0; }
  void set(std::size_t r, std::size_t c, bool v) { data_[r * cols_ + c] = v ? 1 : 0; }
  bool row_any(std::size_t r) const;
  std::size_t count() const;
  const std::vector<std::uint8_t>& data() const noexcept { return data_; }

  friend bool operator==(const BinaryMatrix&, const BinaryMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> data_;
};

// Training targets for one video: alpha (frames x instances) gates the
// regression term, beta marks matched instances, y is the confidence target
// and sigma lists frame indices by decreasing p_hat.
struct AssignmentStatus {
  BinaryMatrix alpha;
  std::vector<std::uint8_t> beta;
  std::vector<std::uint8_t> y;
  std::vector<std::size_t> sigma;

  std::size_t num_frames() const noexcept { return y.size(); }
  std::size_t num_instances() const noexcept { return beta.size(); }
  std::size_t positives() const;
};

enum class SelfAssessVariant { Salad, TopConfidence, ConfidenceThreshold, IoUThreshold };
enum class PruningVariant { Salad, NoPruning, Top1IoU, Random, Frozen };

std::string_view to_string(SelfAssessVariant v);
std::string_view to_string(PruningVariant v);
// Accepts the config spellings ("salad", "top_confidence", "no_pruning",
// "top1iou", ...). Throws InvalidArgument on unknown names.
SelfAssessVariant parse_self_assess_variant(std::string_view name);
PruningVariant parse_pruning_variant(std::string_view name);

// Frame order by decreasing p_hat; ties go to the earlier anchor time.
std::vector<std::size_t> confidence_order(std::span<const FramePrediction> preds);

// containment(t, n) == 1 iff instance n contains the anchor of frame t.
BinaryMatrix containment(std::span<const FramePrediction> preds, const GroundTruthSet& gts);

// Greedy self-assessment assignment. Frames are visited by decreasing
// confidence; every still-unmatched instance containing the frame marks it
// as a regressor, and the first frame whose segment overlaps the instance
// with tIoU > mu claims it (beta = 1) and becomes the positive (y = 1).
// Frames inside only already-claimed instances are pruned.
AssignmentStatus assign_salad(std::span<const FramePrediction> preds, const GroundTruthSet& gts, double mu);

// Alternative confidence targets. All non-Salad variants set alpha for every
// contained frame.
AssignmentStatus assign_variant(SelfAssessVariant strategy, std::span<const FramePrediction> preds,
                                const GroundTruthSet& gts, double mu);

// Replaces alpha according to a pruning ablation; y is left untouched.
AssignmentStatus apply_pruning_variant(PruningVariant strategy, AssignmentStatus status,
                                       std::span<const FramePrediction> preds, const GroundTruthSet& gts,
                                       std::uint64_t rng_seed,
                                       const std::optional<BinaryMatrix>& frozen_alpha = std::nullopt);

// Frames that lie inside some instance but have an all-zero alpha row.
std::size_t count_pruned(const AssignmentStatus& status, std::span<const FramePrediction> preds,
                         const GroundTruthSet& gts);

}  // namespace salad
