// Copyright (C) 2026 The salad authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "salad/assignment.hpp"
#include "salad/autodiff.hpp"

namespace salad {

// Probabilities are clamped to [kProbEps, 1 - kProbEps] inside every log.
inline constexpr double kProbEps = 1e-7;

struct LossWeights {
  double lambda1 = 1.0;
  double lambda2 = 0.1;
  double mu = 0.5;

  void validate() const;
};

enum class ClassLoss { PerClassBinary, Categorical };

// Per-frame class targets. w[t] == 0 exactly when class_id[t] is background.
struct FrameLabels {
  std::vector<int> class_id;
  std::vector<std::uint8_t> w;

  // Frame t takes the class of an instance containing anchors[t]; when
  // several do, the one starting first wins.
  static FrameLabels from_ground_truth(std::span<const double> anchors, const GroundTruthSet& gts);
  std::size_t size() const noexcept { return class_id.size(); }
};

// offsets (T x 2) -> absolute segments (T x 2, columns start/end):
// [t - eps_start * scale, t + eps_end * scale].
ad::Var segments_from_offsets(const ad::Var& offsets, std::span<const double> anchors, double scale);

// sum_t BCE(y_t, p_t) with the clamp guard; confidence is T x 1.
ad::Var confidence_bce(const ad::Var& confidence, std::span<const std::uint8_t> y);

// sum_{t,n} alpha_{t,n} * tiou_raw(segment_t, gt_n); segments is T x 2.
ad::Var overlap_reward(const ad::Var& segments, const GroundTruthSet& gts, const BinaryMatrix& alpha);

// Regression / self-assessment loss: confidence_bce - lambda1 * overlap_reward.
// Assignment targets are constants.
ad::Var loss_rsa(const ad::Var& segments, const ad::Var& confidence, const GroundTruthSet& gts,
                 const AssignmentStatus& status, double lambda1);

// Frame classification loss over frames with w_t = 1. PerClassBinary sums the
// binary cross-entropy of every column (background included) against the
// one-hot target; Categorical is -log p[class].
ad::Var loss_cls(const ad::Var& class_probs, const FrameLabels& labels, ClassLoss kind = ClassLoss::PerClassBinary);

ad::Var loss_total(const ad::Var& rsa, const ad::Var& cls, double lambda2);

// Scalar conveniences over plain predictions.
double loss_rsa(std::span<const FramePrediction> preds, const GroundTruthSet& gts, const AssignmentStatus& status,
                double lambda1);
double loss_cls(std::span<const FramePrediction> preds, const FrameLabels& labels,
                ClassLoss kind = ClassLoss::PerClassBinary);
double loss_total(std::span<const FramePrediction> preds, const GroundTruthSet& gts, const AssignmentStatus& status,
                  const FrameLabels& labels, const LossWeights& weights, ClassLoss kind = ClassLoss::PerClassBinary);

}  // namespace salad
