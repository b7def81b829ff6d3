// Copyright (C) 2026 The salad authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "salad/assignment.hpp"
#include "salad/interval.hpp"

namespace salad {

struct Proposal {
  Interval interval;
  double score = 0.0;
  int class_id = 1;
  std::size_t source_frame = 0;
};

// How the self-assessment score p_r and the classification confidence p_c
// are combined into a ranking score.
enum class FusionStrategy { RegressionOnly, ArithmeticMean, GeometricMean, NormalizedProduct };

std::string_view to_string(FusionStrategy f);
FusionStrategy parse_fusion(std::string_view name);

// RegressionOnly: p_r; ArithmeticMean: (p_r + p_c) / 2; GeometricMean:
// sqrt(p_r p_c); NormalizedProduct: p_r (1 - exp(-zeta p_c)).
double fuse_confidence(double p_r, double p_c, FusionStrategy strategy, double zeta = 4.0);

// One proposal per frame, labelled with the most likely non-background class
// and clipped to [0, video_length].
std::vector<Proposal> extract_proposals(std::span<const FramePrediction> preds, double video_length,
                                        FusionStrategy fusion = FusionStrategy::RegressionOnly, double zeta = 4.0);

// Gaussian soft-NMS: pick the best remaining proposal, decay the others by
// exp(-tiou^2 / sigma), drop anything below min_score. Returns proposals
// sorted by final score, descending. With per_class == false every proposal
// competes with every other.
std::vector<Proposal> soft_nms(std::vector<Proposal> proposals, double sigma = 0.5, double min_score = 1e-3,
                               bool per_class = true);

// Highest k scores; equal scores keep the earlier start first.
std::vector<Proposal> top_k(std::vector<Proposal> proposals, long k);

struct InferenceConfig {
  FusionStrategy fusion = FusionStrategy::RegressionOnly;
  double zeta = 4.0;
  double sigma_nms = 0.5;
  double min_score = 1e-3;
  bool per_class = true;
  long top_k = 0;  // 0 keeps everything

  void validate() const;
};

// extract_proposals -> soft_nms -> top_k.
std::vector<Proposal> detect(std::span<const FramePrediction> preds, double video_length, const InferenceConfig& cfg);

}  // namespace salad
