// Copyright (C) 2026 The salad authors
// SPDX-License-Identifier: Apache-2.0

#include "salad/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "salad/error.hpp"

namespace salad {

void LossWeights::validate() const {
  if (!(lambda1 >= 0.0)) throw ConfigError("train.lambda1", "must be >= 0");
  if (!(lambda2 >= 0.0)) throw ConfigError("train.lambda2", "must be >= 0");
  if (!(mu > 0.0 && mu < 1.0)) throw ConfigError("train.mu", "must lie in (0, 1)");
}

FrameLabels FrameLabels::from_ground_truth(std::span<const double> anchors, const GroundTruthSet& gts) {
  FrameLabels labels;
  labels.class_id.assign(anchors.size(), 0);
  labels.w.assign(anchors.size(), 0);
  for (std::size_t t = 0; t < anchors.size(); ++t) {
    const GroundTruth* owner = nullptr;
    for (const auto& g : gts.instances) {
      if (g.segment.contains(anchors[t]) && (!owner || g.segment.start() < owner->segment.start())) owner = &g;
    }
    if (owner) {
      labels.class_id[t] = owner->class_id;
      labels.w[t] = 1;
    }
  }
  return labels;
}

namespace {

double clamp_prob(double p) { return std::clamp(p, kProbEps, 1.0 - kProbEps); }

// d/dp of -[y log p + (1 - y) log(1 - p)], zero where the clamp is active.
double bce_grad(double y, double p) {
  if (p < kProbEps || p > 1.0 - kProbEps) return 0.0;
  return -y / p + (1.0 - y) / (1.0 - p);
}

double bce(double y, double p) {
  const double q = clamp_prob(p);
  return -(y * std::log(q) + (1.0 - y) * std::log(1.0 - q));
}

}  // namespace

ad::Var segments_from_offsets(const ad::Var& offsets, std::span<const double> anchors, double scale) {
  const auto& ov = offsets.value();
  if (ov.cols() != 2 || ov.rows() != anchors.size()) {
    throw InvalidArgument("segments_from_offsets: offsets must be T x 2 with one anchor per row");
  }
  if (!(scale > 0.0)) throw InvalidArgument("segments_from_offsets: scale must be positive");
  ad::Tensor seg = ad::Tensor::matrix(ov.rows(), 2);
  for (std::size_t t = 0; t < ov.rows(); ++t) {
    seg(t, 0) = anchors[t] - ov(t, 0) * scale;
    seg(t, 1) = anchors[t] + ov(t, 1) * scale;
  }
  return ad::make_op(std::move(seg), {offsets}, [scale](ad::Node& n) {
    auto& g = n.inputs[0]->grad_buffer();
    for (std::size_t t = 0; t < g.rows(); ++t) {
      g(t, 0) -= scale * n.grad(t, 0);
      g(t, 1) += scale * n.grad(t, 1);
    }
  });
}

ad::Var confidence_bce(const ad::Var& confidence, std::span<const std::uint8_t> y) {
  const auto& pv = confidence.value();
  if (pv.size() != y.size()) throw InvalidArgument("confidence_bce: target length differs from frame count");
  std::vector<double> targets(y.begin(), y.end());
  double total = 0.0;
  for (std::size_t t = 0; t < pv.size(); ++t) total += bce(targets[t], pv[t]);
  return ad::make_op(ad::Tensor::scalar(total), {confidence}, [targets = std::move(targets)](ad::Node& n) {
    auto& g = n.inputs[0]->grad_buffer();
    const auto& p = n.inputs[0]->value;
    for (std::size_t t = 0; t < p.size(); ++t) g[t] += n.grad[0] * bce_grad(targets[t], p[t]);
  });
}

ad::Var overlap_reward(const ad::Var& segments, const GroundTruthSet& gts, const BinaryMatrix& alpha) {
  const auto& sv = segments.value();
  if (sv.cols() != 2) throw InvalidArgument("overlap_reward: segments must be T x 2");
  if (alpha.rows() != sv.rows() || alpha.cols() != gts.size()) {
    throw InvalidArgument("overlap_reward: alpha shape differs from frames x instances");
  }
  double total = 0.0;
  for (std::size_t t = 0; t < sv.rows(); ++t) {
    for (std::size_t n = 0; n < gts.size(); ++n) {
      if (alpha.at(t, n)) total += tiou_raw(Interval(sv(t, 0), sv(t, 1)), gts.instances[n].segment);
    }
  }
  return ad::make_op(ad::Tensor::scalar(total), {segments}, [gts, alpha](ad::Node& n) {
    const auto& s = n.inputs[0]->value;
    auto& g = n.inputs[0]->grad_buffer();
    const double upstream = n.grad[0];
    for (std::size_t t = 0; t < s.rows(); ++t) {
      const double ps = s(t, 0);
      const double pe = s(t, 1);
      for (std::size_t k = 0; k < gts.size(); ++k) {
        if (!alpha.at(t, k)) continue;
        const double gs = gts.instances[k].segment.start();
        const double ge = gts.instances[k].segment.end();
        const double inter = std::min(ge, pe) - std::max(gs, ps);
        const double uni = std::max(ge, pe) - std::min(gs, ps);
        if (uni <= 0.0) continue;
        // One-sided derivatives of min/max; ties take the "prediction outside" side.
        const double di_ds = ps > gs ? -1.0 : 0.0;
        const double du_ds = ps > gs ? 0.0 : -1.0;
        const double di_de = pe < ge ? 1.0 : 0.0;
        const double du_de = pe < ge ? 0.0 : 1.0;
        const double inv = 1.0 / (uni * uni);
        g(t, 0) += upstream * (di_ds * uni - inter * du_ds) * inv;
        g(t, 1) += upstream * (di_de * uni - inter * du_de) * inv;
      }
    }
  });
}

ad::Var loss_rsa(const ad::Var& segments, const ad::Var& confidence, const GroundTruthSet& gts,
                 const AssignmentStatus& status, double lambda1) {
  if (segments.value().rows() != status.num_frames() || confidence.value().size() != status.num_frames()) {
    throw InvalidArgument("loss_rsa: assignment status does not match the frame count");
  }
  return ad::sub(confidence_bce(confidence, status.y), ad::scale(overlap_reward(segments, gts, status.alpha), lambda1));
}

ad::Var loss_cls(const ad::Var& class_probs, const FrameLabels& labels, ClassLoss kind) {
  const auto& pv = class_probs.value();
  if (pv.rows() != labels.size()) throw InvalidArgument("loss_cls: label count differs from frame count");
  const std::size_t classes = pv.cols();
  for (int c : labels.class_id) {
    if (c < 0 || static_cast<std::size_t>(c) >= classes) throw InvalidArgument("loss_cls: class id out of range");
  }
  double total = 0.0;
  for (std::size_t t = 0; t < pv.rows(); ++t) {
    if (!labels.w[t]) continue;
    const auto target = static_cast<std::size_t>(labels.class_id[t]);
    if (kind == ClassLoss::Categorical) {
      total -= std::log(clamp_prob(pv(t, target)));
    } else {
      for (std::size_t k = 0; k < classes; ++k) total += bce(k == target ? 1.0 : 0.0, pv(t, k));
    }
  }
  return ad::make_op(ad::Tensor::scalar(total), {class_probs}, [labels, kind](ad::Node& n) {
    const auto& p = n.inputs[0]->value;
    auto& g = n.inputs[0]->grad_buffer();
    const double up = n.grad[0];
    for (std::size_t t = 0; t < p.rows(); ++t) {
      if (!labels.w[t]) continue;
      const auto target = static_cast<std::size_t>(labels.class_id[t]);
      if (kind == ClassLoss::Categorical) {
        const double q = p(t, target);
        if (q >= kProbEps && q <= 1.0 - kProbEps) g(t, target) -= up / q;
      } else {
        for (std::size_t k = 0; k < p.cols(); ++k) g(t, k) += up * bce_grad(k == target ? 1.0 : 0.0, p(t, k));
      }
    }
  });
}

ad::Var loss_total(const ad::Var& rsa, const ad::Var& cls, double lambda2) {
  return ad::add(rsa, ad::scale(cls, lambda2));
}

namespace {

ad::Var segments_of(std::span<const FramePrediction> preds) {
  ad::Tensor seg = ad::Tensor::matrix(preds.size(), 2);
  for (std::size_t t = 0; t < preds.size(); ++t) {
    seg(t, 0) = preds[t].interval.start();
    seg(t, 1) = preds[t].interval.end();
  }
  return ad::Var::constant(std::move(seg));
}

ad::Var confidences_of(std::span<const FramePrediction> preds) {
  ad::Tensor p = ad::Tensor::matrix(preds.size(), 1);
  for (std::size_t t = 0; t < preds.size(); ++t) p[t] = preds[t].p_hat;
  return ad::Var::constant(std::move(p));
}

ad::Var class_probs_of(std::span<const FramePrediction> preds) {
  const std::size_t classes = preds.empty() ? 0 : preds.front().class_dist.size();
  ad::Tensor p = ad::Tensor::matrix(preds.size(), classes);
  for (std::size_t t = 0; t < preds.size(); ++t) {
    if (preds[t].class_dist.size() != classes) throw InvalidArgument("loss_cls: ragged class distributions");
    for (std::size_t k = 0; k < classes; ++k) p(t, k) = preds[t].class_dist[k];
  }
  return ad::Var::constant(std::move(p));
}

}  // namespace

double loss_rsa(std::span<const FramePrediction> preds, const GroundTruthSet& gts, const AssignmentStatus& status,
                double lambda1) {
  return loss_rsa(segments_of(preds), confidences_of(preds), gts, status, lambda1).value().item();
}

double loss_cls(std::span<const FramePrediction> preds, const FrameLabels& labels, ClassLoss kind) {
  return loss_cls(class_probs_of(preds), labels, kind).value().item();
}

double loss_total(std::span<const FramePrediction> preds, const GroundTruthSet& gts, const AssignmentStatus& status,
                  const FrameLabels& labels, const LossWeights& weights, ClassLoss kind) {
  return loss_rsa(preds, gts, status, weights.lambda1) + weights.lambda2 * loss_cls(preds, labels, kind);
}

}  // namespace salad
