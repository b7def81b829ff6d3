// Copyright (C) 2026 The salad authors
// SPDX-License-Identifier: Apache-2.0

#include "salad/interval.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "salad/error.hpp"

namespace salad {

Interval::Interval(double start, double end) : start_(start), end_(end) {
  if (!std::isfinite(start) || !std::isfinite(end)) {
    throw InvalidArgument("interval endpoints must be finite");
  }
  if (start > end) {
    throw InvalidArgument("interval start " + std::to_string(start) + " exceeds end " + std::to_string(end));
  }
}

Interval Interval::clipped(double lo, double hi) const {
  const double s = std::clamp(start_, lo, hi);
  const double e = std::clamp(end_, lo, hi);
  return {s, e};
}

OffsetPair::OffsetPair(double s, double e) : eps_start(s), eps_end(e) {
  if (!(s >= 0.0 && s <= 1.0) || !(e >= 0.0 && e <= 1.0)) {
    throw InvalidArgument("offsets must lie in [0, 1]");
  }
}

double tiou_raw(const Interval& a, const Interval& b) {
  const double inter = std::min(a.end(), b.end()) - std::max(a.start(), b.start());
  const double uni = std::max(a.end(), b.end()) - std::min(a.start(), b.start());
  // Union is zero only when both intervals are the same point.
  if (uni <= 0.0) return 1.0;
  return inter / uni;
}

double tiou(const Interval& a, const Interval& b) { return std::max(0.0, tiou_raw(a, b)); }

Interval segment_from_offsets(double t, const OffsetPair& off, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw InvalidArgument("offset scale must be positive");
  }
  return {t - off.eps_start * scale, t + off.eps_end * scale};
}

}  // namespace salad
