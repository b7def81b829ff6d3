// Copyright (C) 2026 The salad authors
// SPDX-License-Identifier: Apache-2.0

#include "salad/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "salad/error.hpp"

namespace salad {

void FramePrediction::validate() const {
  if (!std::isfinite(p_hat)) throw InvalidArgument("p_hat is not finite");
  if (p_hat < 0.0 || p_hat > 1.0) throw InvalidArgument("p_hat outside [0, 1]");
  if (!interval.contains(t)) throw InvalidArgument("predicted segment does not contain its anchor");
  if (class_dist.empty()) return;
  double sum = 0.0;
  for (double p : class_dist) {
    if (!(p >= 0.0)) throw InvalidArgument("negative or NaN class probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw InvalidArgument("class distribution does not sum to 1");
}

void GroundTruthSet::validate() const {
  if (!(video_length > 0.0)) throw InvalidArgument("video length must be positive");
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& g = instances[i];
    if (g.class_id < 1) throw InvalidArgument("instance " + std::to_string(i) + " has background class");
    if (g.segment.start() < 0.0 || g.segment.end() > video_length) {
      throw InvalidArgument("instance " + std::to_string(i) + " lies outside the video");
    }
  }
}

bool BinaryMatrix::row_any(std::size_t r) const {
  const auto* row = data_.data() + r * cols_;
  return std::any_of(row, row + cols_, [](std::uint8_t v) { return v != 0; });
}

std::size_t BinaryMatrix::count() const {
  return static_cast<std::size_t>(std::count_if(data_.begin(), data_.end(), [](std::uint8_t v) { return v != 0; }));
}

std::size_t AssignmentStatus::positives() const {
  return static_cast<std::size_t>(std::count(y.begin(), y.end(), std::uint8_t{1}));
}

std::string_view to_string(SelfAssessVariant v) {
  switch (v) {
    case SelfAssessVariant::Salad: return "salad";
    case SelfAssessVariant::TopConfidence: return "top_confidence";
    case SelfAssessVariant::ConfidenceThreshold: return "confidence_threshold";
    case SelfAssessVariant::IoUThreshold: return "iou_threshold";
  }
  return "?";
}

std::string_view to_string(PruningVariant v) {
  switch (v) {
    case PruningVariant::Salad: return "salad";
    case PruningVariant::NoPruning: return "no_pruning";
    case PruningVariant::Top1IoU: return "top1iou";
    case PruningVariant::Random: return "random";
    case PruningVariant::Frozen: return "frozen";
  }
  return "?";
}

SelfAssessVariant parse_self_assess_variant(std::string_view name) {
  for (auto v : {SelfAssessVariant::Salad, SelfAssessVariant::TopConfidence, SelfAssessVariant::ConfidenceThreshold,
                 SelfAssessVariant::IoUThreshold}) {
    if (to_string(v) == name) return v;
  }
  throw InvalidArgument("unknown self-assessment strategy '" + std::string(name) +
                        "' (expected salad, top_confidence, confidence_threshold, iou_threshold)");
}

PruningVariant parse_pruning_variant(std::string_view name) {
  for (auto v : {PruningVariant::Salad, PruningVariant::NoPruning, PruningVariant::Top1IoU, PruningVariant::Random,
                 PruningVariant::Frozen}) {
    if (to_string(v) == name) return v;
  }
  throw InvalidArgument("unknown pruning strategy '" + std::string(name) +
                        "' (expected salad, no_pruning, top1iou, random, frozen)");
}

namespace {

void check_inputs(std::span<const FramePrediction> preds, double mu) {
  if (preds.empty()) throw InvalidArgument("assignment needs at least one frame prediction");
  if (!(mu > 0.0 && mu < 1.0)) throw InvalidArgument("mu must lie in (0, 1)");
  for (const auto& p : preds) {
    if (std::isnan(p.p_hat)) throw InvalidArgument("NaN confidence in frame prediction");
  }
}

AssignmentStatus empty_status(std::size_t frames, std::size_t instances) {
  AssignmentStatus s;
  s.alpha = BinaryMatrix(frames, instances);
  s.beta.assign(instances, 0);
  s.y.assign(frames, 0);
  return s;
}

}  // namespace

std::vector<std::size_t> confidence_order(std::span<const FramePrediction> preds) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (preds[a].p_hat != preds[b].p_hat) return preds[a].p_hat > preds[b].p_hat;
    return preds[a].t < preds[b].t;
  });
  return order;
}

BinaryMatrix containment(std::span<const FramePrediction> preds, const GroundTruthSet& gts) {
  BinaryMatrix inside(preds.size(), gts.size());
  for (std::size_t t = 0; t < preds.size(); ++t) {
    for (std::size_t n = 0; n < gts.size(); ++n) {
      inside.set(t, n, gts.instances[n].segment.contains(preds[t].t));
    }
  }
  return inside;
}

AssignmentStatus assign_salad(std::span<const FramePrediction> preds, const GroundTruthSet& gts, double mu) {
  check_inputs(preds, mu);
  auto status = empty_status(preds.size(), gts.size());
  status.sigma = confidence_order(preds);

  for (std::size_t frame : status.sigma) {
    const auto& pred = preds[frame];
    for (std::size_t n = 0; n < gts.size(); ++n) {
      if (status.beta[n] != 0) continue;
      const auto& gt = gts.instances[n].segment;
      if (!gt.contains(pred.t)) continue;
      status.alpha.set(frame, n, true);
      if (tiou(pred.interval, gt) > mu) {
        status.beta[n] = 1;
        status.y[frame] = 1;
      }
    }
  }
  return status;
}

AssignmentStatus assign_variant(SelfAssessVariant strategy, std::span<const FramePrediction> preds,
                                const GroundTruthSet& gts, double mu) {
  if (strategy == SelfAssessVariant::Salad) return assign_salad(preds, gts, mu);
  check_inputs(preds, mu);

  auto status = empty_status(preds.size(), gts.size());
  status.sigma = confidence_order(preds);
  status.alpha = containment(preds, gts);

  switch (strategy) {
    case SelfAssessVariant::TopConfidence:
      // First contained frame in confidence order wins each instance.
      for (std::size_t n = 0; n < gts.size(); ++n) {
        for (std::size_t frame : status.sigma) {
          if (status.alpha.at(frame, n)) {
            status.y[frame] = 1;
            status.beta[n] = 1;
            break;
          }
        }
      }
      break;
    case SelfAssessVariant::ConfidenceThreshold:
      for (std::size_t t = 0; t < preds.size(); ++t) {
        if (preds[t].p_hat <= 0.5) continue;
        for (std::size_t n = 0; n < gts.size(); ++n) {
          if (status.alpha.at(t, n)) {
            status.y[t] = 1;
            status.beta[n] = 1;
          }
        }
      }
      break;
    case SelfAssessVariant::IoUThreshold:
      for (std::size_t t = 0; t < preds.size(); ++t) {
        for (std::size_t n = 0; n < gts.size(); ++n) {
          if (status.alpha.at(t, n) && tiou(preds[t].interval, gts.instances[n].segment) > mu) {
            status.y[t] = 1;
            status.beta[n] = 1;
          }
        }
      }
      break;
    default:
      throw InvalidArgument("unknown self-assessment strategy");
  }
  return status;
}

AssignmentStatus apply_pruning_variant(PruningVariant strategy, AssignmentStatus status,
                                       std::span<const FramePrediction> preds, const GroundTruthSet& gts,
                                       std::uint64_t rng_seed, const std::optional<BinaryMatrix>& frozen_alpha) {
  if (status.num_frames() != preds.size() || status.num_instances() != gts.size()) {
    throw InvalidArgument("assignment status does not match predictions / ground truth");
  }
  switch (strategy) {
    case PruningVariant::Salad:
      return status;
    case PruningVariant::NoPruning:
      status.alpha = containment(preds, gts);
      return status;
    case PruningVariant::Random: {
      const auto inside = containment(preds, gts);
      std::mt19937_64 rng(rng_seed);
      std::bernoulli_distribution coin(0.5);
      BinaryMatrix alpha(preds.size(), gts.size());
      for (std::size_t t = 0; t < preds.size(); ++t) {
        for (std::size_t n = 0; n < gts.size(); ++n) {
          if (inside.at(t, n)) alpha.set(t, n, coin(rng));
        }
      }
      status.alpha = std::move(alpha);
      return status;
    }
    case PruningVariant::Top1IoU: {
      BinaryMatrix alpha(preds.size(), gts.size());
      for (std::size_t n = 0; n < gts.size(); ++n) {
        const auto& gt = gts.instances[n].segment;
        std::optional<std::size_t> best;
        double best_iou = -1.0;
        for (std::size_t t = 0; t < preds.size(); ++t) {
          if (!gt.contains(preds[t].t)) continue;
          const double r = tiou(preds[t].interval, gt);
          if (r > best_iou) {
            best_iou = r;
            best = t;
          }
        }
        if (best) alpha.set(*best, n, true);
      }
      status.alpha = std::move(alpha);
      return status;
    }
    case PruningVariant::Frozen: {
      if (!frozen_alpha) throw InvalidArgument("frozen pruning requires a captured alpha matrix");
      if (frozen_alpha->rows() != preds.size() || frozen_alpha->cols() != gts.size()) {
        throw InvalidArgument("frozen alpha has shape " + std::to_string(frozen_alpha->rows()) + "x" +
                              std::to_string(frozen_alpha->cols()) + ", expected " + std::to_string(preds.size()) +
                              "x" + std::to_string(gts.size()));
      }
      const auto inside = containment(preds, gts);
      BinaryMatrix alpha(preds.size(), gts.size());
      for (std::size_t t = 0; t < preds.size(); ++t) {
        for (std::size_t n = 0; n < gts.size(); ++n) alpha.set(t, n, frozen_alpha->at(t, n) && inside.at(t, n));
      }
      status.alpha = std::move(alpha);
      return status;
    }
  }
  throw InvalidArgument("unknown pruning strategy");
}

std::size_t count_pruned(const AssignmentStatus& status, std::span<const FramePrediction> preds,
                         const GroundTruthSet& gts) {
  std::size_t pruned = 0;
  for (std::size_t t = 0; t < preds.size(); ++t) {
    const bool inside = std::any_of(gts.instances.begin(), gts.instances.end(),
                                    [&](const GroundTruth& g) { return g.segment.contains(preds[t].t); });
    if (inside && !status.alpha.row_any(t)) ++pruned;
  }
  return pruned;
}

}  // namespace salad
