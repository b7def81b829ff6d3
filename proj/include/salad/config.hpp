// Copyright (C) 2026 The salad authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "salad/dataset.hpp"
#include "salad/inference.hpp"
#include "salad/model.hpp"
#include "salad/trainer.hpp"

namespace salad {

std::string_view to_string(ClassLoss k);
ClassLoss parse_class_loss(std::string_view name);

// Everything a command needs, read from one JSON file. Sections: synth,
// model, train, inference, eval. Unknown keys are rejected. Model feature
// and class counts always come from the dataset, never from the file.
struct RunConfig {
  SynthConfig synth;
  ModelConfig model;
  TrainConfig train;  // train.inference and train.eval_thresholds mirror the sections below
  InferenceConfig inference;
  std::vector<double> eval_thresholds{0.1, 0.2, 0.3, 0.4, 0.5};
  std::optional<std::uint64_t> synth_seed;
  std::optional<std::uint64_t> train_seed;

  // Throws ConfigError naming "synth.seed" / "train.seed" when absent.
  SynthConfig synth_config() const;
  TrainConfig train_config() const;
  // Model config sized for the dataset, seeded with train.seed.
  ModelConfig model_config(const Dataset& ds) const;

  void validate() const;
  // Canonical JSON; parsing it yields an equal config.
  std::string to_json() const;
};

// `overrides` are "section.key=value" strings; value is parsed as JSON and
// falls back to a plain string.
RunConfig parse_run_config(std::string_view json_text, const std::vector<std::string>& overrides = {});
RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

}  // namespace salad
