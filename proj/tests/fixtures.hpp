// Copyright (C) 2026 The salad authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>
#include <vector>

#include "salad/assignment.hpp"

namespace salad::fixture {

inline FramePrediction frame(double t, double s, double e, double p, std::vector<double> dist = {0.5, 0.5}) {
  FramePrediction f;
  f.t = t;
  f.interval = Interval(s, e);
  f.p_hat = p;
  f.class_dist = std::move(dist);
  return f;
}

// Four frames, one instance [0, 2]; hand-executed in the assignment tests.
inline std::vector<FramePrediction> worked_preds() {
  return {frame(0, 0.0, 1.0, 0.9), frame(1, 0.0, 1.5, 0.2), frame(2, 0.0, 2.2, 0.8), frame(3, 2.5, 3.5, 0.5)};
}

inline GroundTruthSet worked_gts() {
  GroundTruthSet g;
  g.video_length = 4.0;
  g.instances.push_back({Interval(0.0, 2.0), 1});
  return g;
}

struct RandomCase {
  std::vector<FramePrediction> preds;
  GroundTruthSet gts;
  double mu = 0.5;
};

// Random frames at integer anchors with anchored intervals; instances may
// overlap. Confidences come from a small grid so ties occur.
inline RandomCase random_case(std::mt19937_64& rng, std::size_t max_t = 32, std::size_t max_n = 4) {
  std::uniform_int_distribution<std::size_t> t_dist(1, max_t);
  std::uniform_int_distribution<std::size_t> n_dist(0, max_n);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> grid(0, 10);
  RandomCase c;
  const std::size_t T = t_dist(rng);
  const double len = static_cast<double>(T);
  c.gts.video_length = len;
  const std::size_t N = n_dist(rng);
  for (std::size_t n = 0; n < N; ++n) {
    double a = u(rng) * len;
    double b = u(rng) * len;
    if (a > b) std::swap(a, b);
    c.gts.instances.push_back({Interval(a, b), 1 + static_cast<int>(n % 3)});
  }
  for (std::size_t t = 0; t < T; ++t) {
    const double anchor = static_cast<double>(t) + 0.5;
    const double p = u(rng) < 0.3 ? grid(rng) / 10.0 : u(rng);
    c.preds.push_back(frame(anchor, anchor - u(rng) * 6.0, anchor + u(rng) * 6.0, p));
  }
  c.mu = 0.05 + 0.9 * u(rng);
  return c;
}

}  // namespace salad::fixture
