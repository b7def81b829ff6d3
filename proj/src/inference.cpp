// Copyright (C) 2026 The salad authors
// SPDX-License-Identifier: Apache-2.0

#include "salad/inference.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "salad/error.hpp"

namespace salad {

std::string_view to_string(FusionStrategy f) {
  switch (f) {
    case FusionStrategy::RegressionOnly: return "regression_only";
    case FusionStrategy::ArithmeticMean: return "arithmetic_mean";
    case FusionStrategy::GeometricMean: return "geometric_mean";
    case FusionStrategy::NormalizedProduct: return "normalized_product";
  }
  return "?";
}

FusionStrategy parse_fusion(std::string_view name) {
  for (auto f : {FusionStrategy::RegressionOnly, FusionStrategy::ArithmeticMean, FusionStrategy::GeometricMean,
                 FusionStrategy::NormalizedProduct}) {
    if (to_string(f) == name) return f;
  }
  throw InvalidArgument("unknown fusion strategy '" + std::string(name) +
                        "' (expected regression_only, arithmetic_mean, geometric_mean, normalized_product)");
}

double fuse_confidence(double p_r, double p_c, FusionStrategy strategy, double zeta) {
  if (!(p_r >= 0.0 && p_r <= 1.0) || !(p_c >= 0.0 && p_c <= 1.0)) {
    throw InvalidArgument("fuse_confidence: inputs must lie in [0, 1]");
  }
  switch (strategy) {
    case FusionStrategy::RegressionOnly: return p_r;
    case FusionStrategy::ArithmeticMean: return 0.5 * (p_r + p_c);
    case FusionStrategy::GeometricMean: return std::sqrt(p_r * p_c);
    case FusionStrategy::NormalizedProduct: return p_r * (1.0 - std::exp(-zeta * p_c));
  }
  throw InvalidArgument("unknown fusion strategy");
}

std::vector<Proposal> extract_proposals(std::span<const FramePrediction> preds, double video_length,
                                        FusionStrategy fusion, double zeta) {
  std::vector<Proposal> out;
  out.reserve(preds.size());
  for (std::size_t t = 0; t < preds.size(); ++t) {
    const auto& p = preds[t];
    if (p.class_dist.size() < 2) throw InvalidArgument("extract_proposals: need background plus >= 1 class");
    const auto best = std::max_element(p.class_dist.begin() + 1, p.class_dist.end());
    Proposal prop;
    prop.interval = p.interval.clipped(0.0, video_length);
    prop.class_id = static_cast<int>(best - p.class_dist.begin());
    prop.score = fuse_confidence(p.p_hat, *best, fusion, zeta);
    prop.source_frame = t;
    out.push_back(prop);
  }
  return out;
}

namespace {

bool ranks_before(const Proposal& a, const Proposal& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.interval.start() < b.interval.start();
}

}  // namespace

std::vector<Proposal> soft_nms(std::vector<Proposal> proposals, double sigma, double min_score, bool per_class) {
  if (!(sigma > 0.0)) throw InvalidArgument("soft_nms: sigma must be positive");
  std::vector<Proposal> kept;
  kept.reserve(proposals.size());
  std::erase_if(proposals, [&](const Proposal& p) { return p.score < min_score; });
  while (!proposals.empty()) {
    auto best = std::min_element(proposals.begin(), proposals.end(), ranks_before);
    Proposal top = *best;
    proposals.erase(best);
    for (auto& p : proposals) {
      if (per_class && p.class_id != top.class_id) continue;
      const double o = tiou(top.interval, p.interval);
      p.score *= std::exp(-(o * o) / sigma);
    }
    std::erase_if(proposals, [&](const Proposal& p) { return p.score < min_score; });
    kept.push_back(top);
  }
  return kept;
}

std::vector<Proposal> top_k(std::vector<Proposal> proposals, long k) {
  if (k < 0) throw InvalidArgument("top_k: k must be >= 0");
  std::stable_sort(proposals.begin(), proposals.end(), ranks_before);
  if (static_cast<std::size_t>(k) < proposals.size()) proposals.resize(static_cast<std::size_t>(k));
  return proposals;
}

void InferenceConfig::validate() const {
  if (!(sigma_nms > 0.0)) throw ConfigError("inference.sigma_nms", "must be > 0");
  if (!(min_score >= 0.0)) throw ConfigError("inference.min_score", "must be >= 0");
  if (!(zeta > 0.0)) throw ConfigError("inference.zeta", "must be > 0");
  if (top_k < 0) throw ConfigError("inference.top_k", "must be >= 0");
}

std::vector<Proposal> detect(std::span<const FramePrediction> preds, double video_length, const InferenceConfig& cfg) {
  auto props = soft_nms(extract_proposals(preds, video_length, cfg.fusion, cfg.zeta), cfg.sigma_nms, cfg.min_score,
                        cfg.per_class);
  if (cfg.top_k > 0) props = top_k(std::move(props), cfg.top_k);
  return props;
}

}  // namespace salad
