// Copyright (C) 2026 The salad authors
// SPDX-License-Identifier: Apache-2.0

#include "salad/model.hpp"

#include <cmath>
#include <random>

#include "salad/error.hpp"

namespace salad {

void ModelConfig::validate() const {
  if (feature_dim < 1) throw ConfigError("model.feature_dim", "must be >= 1");
  if (hidden_dim < 1) throw ConfigError("model.hidden_dim", "must be >= 1");
  if (num_classes < 1) throw ConfigError("model.num_classes", "must be >= 1");
  if (head_width1 < 1) throw ConfigError("model.head_width1", "must be >= 1");
  if (head_width2 < 1) throw ConfigError("model.head_width2", "must be >= 1");
}

void ParamSet::add(std::string name, ad::Tensor tensor) {
  if (contains(name)) throw InvalidArgument("duplicate parameter name " + name);
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(tensor));
}

std::size_t ParamSet::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  throw InvalidArgument("unknown parameter " + std::string(name));
}

bool ParamSet::contains(std::string_view name) const {
  for (const auto& n : names_) {
    if (n == name) return true;
  }
  return false;
}

std::size_t ParamSet::element_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], ad::Tensor(tensors_[i].shape(), 0.0));
  return out;
}

void ParamSet::add_scaled(const ParamSet& other, double s) {
  if (other.size() != size()) throw InvalidArgument("add_scaled: parameter sets differ");
  for (std::size_t i = 0; i < size(); ++i) {
    if (!tensors_[i].same_shape(other[i])) throw InvalidArgument("add_scaled: shape mismatch at " + names_[i]);
    tensors_[i].mat() += s * other[i].mat();
  }
}

double ParamSet::squared_norm() const {
  double acc = 0.0;
  for (const auto& t : tensors_) {
    for (double v : t.data()) acc += v * v;
  }
  return acc;
}

ParamGroup group_of(std::string_view name) {
  if (name.starts_with("regression.")) return ParamGroup::Regression;
  if (name.starts_with("scoring.")) return ParamGroup::Scoring;
  if (name.starts_with("classification.")) return ParamGroup::Classification;
  return ParamGroup::Encoder;
}

namespace {

struct Layer {
  std::string prefix;
  std::size_t in;
  std::size_t out;
};

std::vector<Layer> head_layers(const ModelConfig& cfg) {
  const std::size_t enc = 2 * cfg.hidden_dim;
  const std::size_t w1 = cfg.head_width1;
  const std::size_t w2 = cfg.head_width2;
  return {
      {"regression.0", enc, w1},    {"regression.1", w1, w2},   {"regression.2", w2, w2},
      {"regression.3", w2, 2},      {"scoring.0", enc, w1},     {"scoring.1", w1, w2},
      {"scoring.2", w2, w2},        {"scoring.3", w2, 1},       {"classification.0", enc, w1},
      {"classification.1", w1, w2}, {"classification.2", w2, cfg.num_classes + 1},
  };
}

}  // namespace

ParamSet init_params(const ModelConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  auto uniform = [&](std::vector<std::size_t> shape, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    ad::Tensor t(std::move(shape));
    for (double& v : t.data()) v = dist(rng);
    return t;
  };

  ParamSet p;
  const std::size_t d = cfg.feature_dim;
  const std::size_t h = cfg.hidden_dim;
  for (const char* dir : {"gru_fwd", "gru_bwd"}) {
    const std::string base(dir);
    p.add(base + ".w_input", uniform({d, 3 * h}, d));
    p.add(base + ".w_hidden", uniform({h, 3 * h}, h));
    p.add(base + ".bias", uniform({3 * h}, h));
  }
  for (const auto& l : head_layers(cfg)) {
    p.add(l.prefix + ".weight", uniform({l.in, l.out}, l.in));
    p.add(l.prefix + ".bias", uniform({l.out}, l.in));
  }
  return p;
}

std::size_t parameter_count(const ModelConfig& cfg) {
  const std::size_t d = cfg.feature_dim;
  const std::size_t h = cfg.hidden_dim;
  std::size_t n = 2 * (d * 3 * h + h * 3 * h + 3 * h);
  for (const auto& l : head_layers(cfg)) n += l.in * l.out + l.out;
  return n;
}

BoundParams BoundParams::bind(const ParamSet& params, bool requires_grad) {
  BoundParams b;
  b.source = &params;
  b.leaves.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    b.leaves.push_back(requires_grad ? ad::Var::parameter(params[i]) : ad::Var::constant(params[i]));
  }
  return b;
}

ParamSet BoundParams::gradients() const {
  ParamSet g;
  for (std::size_t i = 0; i < leaves.size(); ++i) g.add(source->name(i), leaves[i].grad());
  return g;
}

namespace {

ad::Var dense(const BoundParams& p, const std::string& prefix, const ad::Var& x) {
  return ad::add_bias(ad::matmul(x, p[prefix + ".weight"]), p[prefix + ".bias"]);
}

ad::Var mlp(const BoundParams& p, const std::string& head, int layers, const ad::Var& x) {
  ad::Var h = x;
  for (int i = 0; i < layers - 1; ++i) h = ad::relu(dense(p, head + "." + std::to_string(i), h));
  return dense(p, head + "." + std::to_string(layers - 1), h);
}

}  // namespace

ModelOutputs forward(const ModelConfig& cfg, const ad::Tensor& features, const BoundParams& params) {
  if (features.rank() != 2 || features.rows() < 1 || features.cols() != cfg.feature_dim) {
    throw InvalidArgument("forward: features must be T x " + std::to_string(cfg.feature_dim) + " with T >= 1");
  }
  const auto x = ad::Var::constant(features);
  const auto fwd = ad::gru_sequence(x, params["gru_fwd.w_input"], params["gru_fwd.w_hidden"], params["gru_fwd.bias"],
                                    false);
  const auto bwd = ad::gru_sequence(x, params["gru_bwd.w_input"], params["gru_bwd.w_hidden"], params["gru_bwd.bias"],
                                    true);
  ModelOutputs out;
  out.hidden = ad::concat_cols(fwd, bwd);
  out.offsets = ad::sigmoid(mlp(params, "regression", 4, out.hidden));
  out.confidence = ad::sigmoid(mlp(params, "scoring", 4, out.hidden));
  out.class_probs = ad::softmax_rows(mlp(params, "classification", 3, out.hidden));
  return out;
}

}  // namespace salad
