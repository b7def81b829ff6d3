// Copyright (C) 2026 The salad authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "salad/error.hpp"
#include "salad/interval.hpp"

using namespace salad;

TEST_CASE("interval construction enforces start <= end and finiteness") {
  CHECK_NOTHROW(Interval(1.0, 1.0));
  CHECK_THROWS_AS(Interval(2.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(Interval(0.0, std::numeric_limits<double>::infinity()), InvalidArgument);
  CHECK_THROWS_AS(Interval(std::nan(""), 1.0), InvalidArgument);
  CHECK_THROWS_AS(OffsetPair(-0.1, 0.5), InvalidArgument);
  CHECK_THROWS_AS(OffsetPair(0.5, 1.01), InvalidArgument);
}

TEST_CASE("tiou_raw on fixed pairs") {
  CHECK(tiou_raw({0, 4}, {0, 4}) == 1.0);
  CHECK(tiou_raw({0, 4}, {1, 3}) == doctest::Approx(0.5));
  CHECK(tiou_raw({0, 1}, {2, 3}) == doctest::Approx(-1.0 / 3.0));
  CHECK(tiou_raw({3, 3}, {3, 3}) == 1.0);  // degenerate union counts as identical
}

TEST_CASE("tiou clamps at zero") {
  CHECK(tiou({0, 1}, {2, 3}) == 0.0);
  CHECK(tiou({0, 4}, {1, 3}) == doctest::Approx(0.5));
  CHECK(tiou({2, 6}, {4, 8}) == doctest::Approx(1.0 / 3.0));
  CHECK(tiou({0, 1}, {1, 2}) == 0.0);
}

TEST_CASE("segment_from_offsets") {
  CHECK(segment_from_offsets(5, {0, 0}, 10) == Interval(5, 5));
  const auto s = segment_from_offsets(5, {0.2, 0.3}, 10);
  CHECK(s.start() == doctest::Approx(3.0));
  CHECK(s.end() == doctest::Approx(8.0));
  CHECK(segment_from_offsets(0, {1, 1}, 4) == Interval(-4, 4));
  CHECK_THROWS_AS(segment_from_offsets(0, {0.5, 0.5}, 0.0), InvalidArgument);
  CHECK_THROWS_AS(segment_from_offsets(0, {0.5, 0.5}, -1.0), InvalidArgument);
}

TEST_CASE("clipping to the video extent") {
  CHECK(Interval(-4, 4).clipped(0, 3) == Interval(0, 3));
  CHECK(Interval(5, 7).clipped(0, 3) == Interval(3, 3));
}

TEST_CASE("tiou properties on random pairs") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  std::uniform_real_distribution<double> pos(0.1, 10.0);
  for (int i = 0; i < 2000; ++i) {
    double a0 = u(rng), a1 = u(rng), b0 = u(rng), b1 = u(rng);
    if (a0 > a1) std::swap(a0, a1);
    if (b0 > b1) std::swap(b0, b1);
    const Interval a(a0, a1), b(b0, b1);
    const double v = tiou(a, b);
    CHECK(v == tiou(b, a));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(tiou_raw(a, b) == doctest::Approx(oracle::tiou_direct(a0, a1, b0, b1)).epsilon(1e-12));

    const double shift = u(rng), k = pos(rng);
    const Interval as(k * a0 + shift, k * a1 + shift), bs(k * b0 + shift, k * b1 + shift);
    CHECK(std::abs(tiou(as, bs) - v) < 1e-9);
    if (a.length() > 0) CHECK(std::abs(tiou(a, a) - 1.0) < 1e-12);
  }
}

TEST_CASE("anchored segments always overlap an instance holding the anchor") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const double s = 10 * u(rng), e = s + 10 * u(rng) + 1e-3;
    const double t = s + (e - s) * u(rng);
    const auto p = segment_from_offsets(t, {u(rng), u(rng)}, 1.0 + 10 * u(rng));
    CHECK(p.contains(t));
    CHECK(tiou_raw(p, {s, e}) >= 0.0);
    if (p.length() > 0 && e - s > 0) CHECK(tiou_raw(p, {s, e}) > 0.0);
  }
}
