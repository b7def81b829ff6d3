// Copyright (C) 2026 The salad authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace salad {

// Closed temporal segment [start, end]. Units are whatever the caller uses
// for time (seconds or frames); both endpoints must be finite.
class Interval {
 public:
  Interval() = default;
  Interval(double start, double end);

  double start() const noexcept { return start_; }
  double end() const noexcept { return end_; }
  double length() const noexcept { return end_ - start_; }
  bool contains(double t) const noexcept { return start_ <= t && t <= end_; }

  // Intersection with [lo, hi]; collapses to a point when fully outside.
  Interval clipped(double lo, double hi) const;

  friend bool operator==(const Interval&, const Interval&) = default;

 private:
  double start_ = 0.0;
  double end_ = 0.0;
};

// Normalised boundary offsets emitted by the regression head.
struct OffsetPair {
  OffsetPair() = default;
  OffsetPair(double eps_start, double eps_end);

  double eps_start = 0.0;
  double eps_end = 0.0;
};

// Signed temporal IoU: (min end - max start) / (max end - min start).
// Negative for disjoint intervals; two identical points give 1.
double tiou_raw(const Interval& a, const Interval& b);

// tiou_raw clamped to [0, 1]; the value used for matching and evaluation.
double tiou(const Interval& a, const Interval& b);

// [t - eps_start * scale, t + eps_end * scale]. Always contains t.
Interval segment_from_offsets(double t, const OffsetPair& off, double scale);

}  // namespace salad
