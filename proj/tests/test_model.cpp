// Copyright (C) 2026 The salad authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "salad/adam.hpp"
#include "salad/autodiff.hpp"
#include "salad/error.hpp"
#include "salad/model.hpp"

using namespace salad;
using ad::Tensor;
using ad::Var;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = n(rng);
  return t;
}

double rel_error(const Tensor& a, const Tensor& b) {
  double diff = 0.0, norm = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    norm += a[i] * a[i] + b[i] * b[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12);
}

}  // namespace

TEST_CASE("tensor shape bookkeeping") {
  Tensor t({2, 3, 4});
  CHECK(t.size() == 24);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 12);
  CHECK(Tensor::scalar(3.5).item() == 3.5);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), InvalidArgument);
  CHECK_THROWS_AS(t.item(), InvalidArgument);
}

TEST_CASE("backward basics") {
  auto p = Var::parameter(Tensor({2, 3}, 0.7));
  ad::backward(ad::sum(p));
  const auto gp = p.grad();
  for (double g : gp.data()) CHECK(g == 1.0);

  auto q = Var::parameter(Tensor({2, 2}, 1.5));
  auto r = Var::parameter(Tensor({2, 2}, -0.5));
  ad::backward(ad::scale(ad::sum(ad::mul(q, q)), 0.0));
  const auto gq = q.grad();
  const auto gr = r.grad();
  for (double g : gq.data()) CHECK(g == 0.0);
  for (double g : gr.data()) CHECK(g == 0.0);  // not on the path

  CHECK_THROWS_AS(ad::backward(Var()), InvalidArgument);
  CHECK_THROWS_AS(ad::backward(q), InvalidArgument);  // not a scalar
}

TEST_CASE("gradients accumulate over shared subexpressions") {
  auto x = Var::parameter(Tensor({1, 1}, 3.0));
  auto y = ad::mul(x, x);
  ad::backward(ad::sum(ad::add(y, y)));  // d(2x^2)/dx = 4x
  CHECK(x.grad()[0] == doctest::Approx(12.0));
}

TEST_CASE("random graphs match central differences") {
  std::mt19937_64 rng(77);
  for (int rep = 0; rep < 5; ++rep) {
    ParamSet p;
    p.add("a", random_tensor({3, 4}, rng));
    p.add("b", random_tensor({4, 5}, rng));
    p.add("c", random_tensor({5}, rng));
    p.add("d", random_tensor({3, 5}, rng));
    auto f = [](const std::vector<Var>& v) {
      auto h = ad::tanh(ad::add_bias(ad::matmul(v[0], v[1]), v[2]));
      auto s = ad::softmax_rows(ad::concat_cols(ad::relu(h), ad::sigmoid(v[3])));
      auto m = ad::mul(ad::slice_cols(s, 2, 7), ad::sub(h, v[3]));
      return ad::sum(ad::scale(m, 1.7));
    };
    auto eval = [&](const ParamSet& ps) {
      std::vector<Var> v;
      for (std::size_t i = 0; i < ps.size(); ++i) v.push_back(Var::constant(ps[i]));
      return f(v).value().item();
    };
    std::vector<Var> leaves;
    for (std::size_t i = 0; i < p.size(); ++i) leaves.push_back(Var::parameter(p[i]));
    ad::backward(f(leaves));
    const auto fd = oracle::finite_difference(p, eval, 1e-6);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(rel_error(leaves[i].grad(), fd[i]) < 1e-4);
  }
}

TEST_CASE("GRU sequence gradients match central differences in both directions") {
  std::mt19937_64 rng(5);
  for (bool reverse : {false, true}) {
    ParamSet p;
    p.add("x", random_tensor({5, 3}, rng));
    p.add("w", random_tensor({3, 12}, rng, 0.5));
    p.add("u", random_tensor({4, 12}, rng, 0.5));
    p.add("b", random_tensor({12}, rng, 0.5));
    p.add("proj", random_tensor({5, 4}, rng));
    auto f = [&](const std::vector<Var>& v) {
      return ad::sum(ad::mul(ad::gru_sequence(v[0], v[1], v[2], v[3], reverse), v[4]));
    };
    auto eval = [&](const ParamSet& ps) {
      std::vector<Var> v;
      for (std::size_t i = 0; i < ps.size(); ++i) v.push_back(Var::constant(ps[i]));
      return f(v).value().item();
    };
    std::vector<Var> leaves;
    for (std::size_t i = 0; i < p.size(); ++i) leaves.push_back(Var::parameter(p[i]));
    ad::backward(f(leaves));
    const auto fd = oracle::finite_difference(p, eval, 1e-6);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(rel_error(leaves[i].grad(), fd[i]) < 1e-6);
  }
}

TEST_CASE("GRU states stay inside (-1, 1)") {
  std::mt19937_64 rng(1);
  auto states = [&](double x_scale, double w_scale) {
    const auto x = Var::constant(random_tensor({50, 4}, rng, x_scale));
    return ad::gru_sequence(x, Var::constant(random_tensor({4, 9}, rng, w_scale)),
                            Var::constant(random_tensor({3, 9}, rng, w_scale)),
                            Var::constant(random_tensor({9}, rng, w_scale)), false)
        .value();
  };
  const auto h = states(1.0, 0.5);
  for (double v : h.data()) CHECK(std::abs(v) < 1.0);
  // Saturated pre-activations may round to exactly +-1 but never beyond.
  const auto hs = states(20.0, 3.0);
  for (double v : hs.data()) CHECK(std::abs(v) <= 1.0);
}

TEST_CASE("forward with zero parameters gives neutral outputs") {
  ModelConfig cfg{4, 3, 2, 5, 4, 0};
  auto p = init_params(cfg);
  for (std::size_t i = 0; i < p.size(); ++i) p[i].fill(0.0);
  std::mt19937_64 rng(2);
  const auto out = forward(cfg, random_tensor({1, 4}, rng), BoundParams::bind(p, false));
  CHECK(out.confidence.value()[0] == 0.5);
  CHECK(out.offsets.value()[0] == 0.5);
  CHECK(out.offsets.value()[1] == 0.5);
  for (double v : out.class_probs.value().data()) CHECK(v == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("forward checks shapes and works for any length") {
  ModelConfig cfg{4, 3, 2, 5, 4, 0};
  const auto p = init_params(cfg);
  const auto b = BoundParams::bind(p, false);
  CHECK_THROWS_AS(forward(cfg, Tensor({3, 5}), b), InvalidArgument);
  CHECK_THROWS_AS(forward(cfg, Tensor({0, 4}), b), InvalidArgument);
  for (std::size_t T : {1, 2, 7, 64}) {
    const auto out = forward(cfg, Tensor({T, 4}, 0.3), b);
    CHECK(out.offsets.value().rows() == T);
    CHECK(out.class_probs.value().cols() == 3);
    for (std::size_t t = 0; t < T; ++t) {
      double s = 0.0;
      for (std::size_t c = 0; c < 3; ++c) s += out.class_probs.value()(t, c);
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("reversing the sequence mirrors the outputs when the directions are swapped") {
  ModelConfig cfg{4, 3, 2, 6, 5, 9};
  const auto p = init_params(cfg);
  auto swapped = p;
  for (const char* part : {"w_input", "w_hidden", "bias"}) {
    std::swap(swapped.at(std::string("gru_fwd.") + part), swapped.at(std::string("gru_bwd.") + part));
  }
  const std::size_t H = cfg.hidden_dim;
  for (const char* head : {"regression.0.weight", "scoring.0.weight", "classification.0.weight"}) {
    auto& w = swapped.at(head);
    for (std::size_t r = 0; r < H; ++r) {
      for (std::size_t c = 0; c < w.cols(); ++c) std::swap(w(r, c), w(r + H, c));
    }
  }
  std::mt19937_64 rng(4);
  const auto x = random_tensor({9, 4}, rng);
  Tensor xr = x;
  for (std::size_t t = 0; t < 9; ++t)
    for (std::size_t d = 0; d < 4; ++d) xr(t, d) = x(8 - t, d);
  const auto a = forward(cfg, x, BoundParams::bind(p, false));
  const auto b = forward(cfg, xr, BoundParams::bind(swapped, false));
  for (std::size_t t = 0; t < 9; ++t) {
    CHECK(b.confidence.value()(t, 0) == doctest::Approx(a.confidence.value()(8 - t, 0)).epsilon(1e-12));
    for (std::size_t k = 0; k < 2; ++k)
      CHECK(b.offsets.value()(t, k) == doctest::Approx(a.offsets.value()(8 - t, k)).epsilon(1e-12));
    for (std::size_t k = 0; k < 3; ++k)
      CHECK(b.class_probs.value()(t, k) == doctest::Approx(a.class_probs.value()(8 - t, k)).epsilon(1e-12));
  }
}

TEST_CASE("forward is deterministic for a fixed seed") {
  ModelConfig cfg{4, 5, 2, 6, 5, 123};
  std::mt19937_64 rng(4);
  const auto x = random_tensor({11, 4}, rng);
  const auto a = forward(cfg, x, BoundParams::bind(init_params(cfg), false));
  const auto b = forward(cfg, x, BoundParams::bind(init_params(cfg), false));
  CHECK(a.offsets.value() == b.offsets.value());
  CHECK(a.confidence.value() == b.confidence.value());
  CHECK(a.class_probs.value() == b.class_probs.value());
}

TEST_CASE("parameter count matches the closed form, including a full-scale layout") {
  auto closed_form = [](std::size_t D, std::size_t H, std::size_t w1, std::size_t w2, std::size_t C) {
    const std::size_t gru = 2 * (3 * H * D + 3 * H * H + 3 * H);
    const std::size_t E = 2 * H;
    const std::size_t reg = (E * w1 + w1) + (w1 * w2 + w2) + (w2 * w2 + w2) + (w2 * 2 + 2);
    const std::size_t score = (E * w1 + w1) + (w1 * w2 + w2) + (w2 * w2 + w2) + (w2 * 1 + 1);
    const std::size_t cls = (E * w1 + w1) + (w1 * w2 + w2) + (w2 * (C + 1) + C + 1);
    return gru + reg + score + cls;
  };
  const ModelConfig desk{16, 64, 3, 64, 32, 0};
  CHECK(parameter_count(desk) == closed_form(16, 64, 64, 32, 3));
  CHECK(init_params(desk).element_count() == parameter_count(desk));
  // Encoder 2048 -> 2048 (1024 per direction); heads 2048 -> 2048 -> 1024 ...; 20 action classes.
  const ModelConfig full{2048, 1024, 20, 2048, 1024, 0};
  CHECK(parameter_count(full) == closed_form(2048, 1024, 2048, 1024, 20));
  const ModelConfig tiny{4, 2, 1, 3, 2, 0};
  CHECK(init_params(tiny).element_count() == closed_form(4, 2, 3, 2, 1));
}

TEST_CASE("initialisation is bounded by fan-in") {
  const ModelConfig cfg{16, 8, 3, 10, 6, 3};
  const auto p = init_params(cfg);
  const auto& w = p.at("regression.0.weight");
  const double bound = 1.0 / std::sqrt(16.0);
  for (double v : w.data()) CHECK(std::abs(v) <= bound);
  for (double v : p.at("gru_fwd.w_input").data()) CHECK(std::abs(v) <= 0.25);
  CHECK(group_of("regression.1.bias") == ParamGroup::Regression);
  CHECK(group_of("scoring.3.weight") == ParamGroup::Scoring);
  CHECK(group_of("classification.0.bias") == ParamGroup::Classification);
  CHECK(group_of("gru_bwd.bias") == ParamGroup::Encoder);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  ParamSet p;
  p.add("w", Tensor({3}, 2.0));
  auto s = AdamState::zeros_like(p);
  const auto before = p;
  adam_step(p, p.zeros_like(), s, {});
  CHECK(p == before);
}

TEST_CASE("adam: first step moves by about lr") {
  ParamSet p;
  p.add("w", Tensor({1}, 1.0));
  auto s = AdamState::zeros_like(p);
  auto g = p.zeros_like();
  g[0][0] = 1.0;
  adam_step(p, g, s, {});
  CHECK(p[0][0] == doctest::Approx(1.0 - 1e-4).epsilon(1e-9));
  CHECK(s.steps[0] == 1);
}

TEST_CASE("adam: quadratic bowl converges") {
  ParamSet p;
  p.add("w", Tensor({1}, 1.0));
  auto s = AdamState::zeros_like(p);
  AdamConfig cfg;
  cfg.lr = 1e-2;
  for (int i = 0; i < 5000; ++i) {
    auto g = p.zeros_like();
    g[0][0] = 2.0 * p[0][0];
    adam_step(p, g, s, cfg);
  }
  CHECK(p[0][0] * p[0][0] < 1e-3);
}

TEST_CASE("adam: non-finite gradients name the tensor; masked tensors stay put") {
  ParamSet p;
  p.add("encoder.w", Tensor({2}, 1.0));
  p.add("head.w", Tensor({2}, 1.0));
  auto s = AdamState::zeros_like(p);
  auto g = p.zeros_like();
  g[1][1] = std::nan("");
  try {
    adam_step(p, g, s, {});
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("head.w") != std::string::npos);
  }
  g[1][1] = 1.0;
  g[0][0] = 1.0;
  const auto head_before = p[1];
  adam_step(p, g, s, {}, std::vector<bool>{true, false});
  CHECK(p[1] == head_before);
  CHECK(s.steps[1] == 0);
  CHECK(p[0][0] < 1.0);
}

TEST_CASE("global norm clipping") {
  ParamSet g;
  g.add("a", Tensor({2}, std::vector<double>{3.0, 4.0}));
  const double n = clip_global_norm(g, 1.0);
  CHECK(n == doctest::Approx(5.0));
  CHECK(std::sqrt(g.squared_norm()) == doctest::Approx(1.0));
  ParamSet small;
  small.add("a", Tensor({2}, std::vector<double>{0.3, 0.4}));
  clip_global_norm(small, 1.0);
  CHECK(small[0][0] == 0.3);
}
