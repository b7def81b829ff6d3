// Copyright (C) 2026 The salad authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "salad/model.hpp"

namespace salad {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moments plus a step counter per tensor. Tensors skipped by a
// masked step keep their counter, so bias correction restarts cleanly when a
// frozen group is released.
struct AdamState {
  ParamSet m;
  ParamSet v;
  std::vector<std::uint64_t> steps;

  static AdamState zeros_like(const ParamSet& params);
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

// One bias-corrected Adam update. `active`, when non-empty, selects which
// tensors are updated. Throws NumericError naming the tensor if a gradient
// contains NaN or Inf.
void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state, const AdamConfig& cfg,
               const std::vector<bool>& active = {});

// Rescales grads in place so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_global_norm(ParamSet& grads, double max_norm);

}  // namespace salad
