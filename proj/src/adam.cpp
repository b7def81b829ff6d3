// Copyright (C) 2026 The salad authors
// SPDX-License-Identifier: Apache-2.0

#include "salad/adam.hpp"

#include <cmath>

#include "salad/error.hpp"

namespace salad {

AdamState AdamState::zeros_like(const ParamSet& params) {
  return {params.zeros_like(), params.zeros_like(), std::vector<std::uint64_t>(params.size(), 0)};
}

void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state, const AdamConfig& cfg,
               const std::vector<bool>& active) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.steps.size() != params.size()) {
    throw InvalidArgument("adam_step: parameter, gradient and state sets differ in size");
  }
  if (!active.empty() && active.size() != params.size()) throw InvalidArgument("adam_step: mask size mismatch");

  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!grads[i].all_finite()) throw NumericError("non-finite gradient in " + grads.name(i));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!active.empty() && !active[i]) continue;
    auto& p = params[i];
    const auto& g = grads[i];
    if (!p.same_shape(g)) throw InvalidArgument("adam_step: gradient shape differs for " + params.name(i));
    const auto step = ++state.steps[i];
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    auto w = p.data();
    const auto gd = g.data();
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gd[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gd[k] * gd[k];
      w[k] -= cfg.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.eps);
    }
  }
}

double clip_global_norm(ParamSet& grads, double max_norm) {
  const double norm = std::sqrt(grads.squared_norm());
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (std::size_t i = 0; i < grads.size(); ++i) grads[i].mat() *= s;
  }
  return norm;
}

}  // namespace salad
