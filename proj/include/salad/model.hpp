// Copyright (C) 2026 The salad authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "salad/autodiff.hpp"
#include "salad/tensor.hpp"

namespace salad {

// Network shape. The bidirectional encoder emits 2 * hidden_dim features per
// frame; the regression and scoring heads are 2H -> w1 -> w2 -> w2 -> out,
// classification is 2H -> w1 -> w2 -> num_classes + 1.
struct ModelConfig {
  std::size_t feature_dim = 16;
  std::size_t hidden_dim = 64;
  std::size_t num_classes = 3;
  std::size_t head_width1 = 64;
  std::size_t head_width2 = 32;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Ordered collection of named tensors. Used for parameters, gradients and
// optimiser moments alike.
class ParamSet {
 public:
  void add(std::string name, ad::Tensor tensor);

  std::size_t size() const noexcept { return tensors_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  ad::Tensor& operator[](std::size_t i) { return tensors_[i]; }
  const ad::Tensor& operator[](std::size_t i) const { return tensors_[i]; }
  // Throws InvalidArgument for unknown names.
  std::size_t index_of(std::string_view name) const;
  ad::Tensor& at(std::string_view name) { return tensors_[index_of(name)]; }
  const ad::Tensor& at(std::string_view name) const { return tensors_[index_of(name)]; }
  bool contains(std::string_view name) const;

  std::size_t element_count() const;
  // Same names and shapes, all zeros.
  ParamSet zeros_like() const;
  void add_scaled(const ParamSet& other, double s);
  double squared_norm() const;

  friend bool operator==(const ParamSet&, const ParamSet&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<ad::Tensor> tensors_;
};

// Parameter groups, used to gate which tensors an optimiser step touches.
enum class ParamGroup { Encoder, Regression, Scoring, Classification };
ParamGroup group_of(std::string_view param_name);

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation, seeded by cfg.seed.
ParamSet init_params(const ModelConfig& cfg);

// Closed-form parameter count for a config.
std::size_t parameter_count(const ModelConfig& cfg);

// Parameters wrapped as graph leaves for one forward/backward pass.
struct BoundParams {
  std::vector<ad::Var> leaves;
  const ParamSet* source = nullptr;

  static BoundParams bind(const ParamSet& params, bool requires_grad);
  const ad::Var& operator[](std::string_view name) const { return leaves[source->index_of(name)]; }
  ParamSet gradients() const;
};

struct ModelOutputs {
  ad::Var hidden;       // T x 2H encoder states
  ad::Var offsets;      // T x 2, sigmoid
  ad::Var confidence;   // T x 1, sigmoid
  ad::Var class_probs;  // T x (C + 1), softmax; column 0 is background
};

// features: T x D with D == cfg.feature_dim and T >= 1.
ModelOutputs forward(const ModelConfig& cfg, const ad::Tensor& features, const BoundParams& params);

}  // namespace salad
