// Copyright (C) 2026 The salad authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "salad/adam.hpp"
#include "salad/assignment.hpp"
#include "salad/model.hpp"

namespace salad {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary container: "SALADCKPT", u32 version, u32 section count, then
// sections of (u32 name length, name, u64 payload length, payload). All
// integers and floats little-endian; tensors carry dtype, rank and dims
// before their row-major data.
struct Checkpoint {
  ModelConfig model;
  std::string run_config;  // JSON echo of the effective configuration
  ParamSet params;
  std::optional<AdamState> optimizer;
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  std::map<std::string, BinaryMatrix> frozen_alpha;  // per video id

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& is);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Checks that the stored tensors match the layout `expected` produces and
// returns the parameters. Throws InvalidArgument listing every missing,
// unexpected or mis-shaped tensor.
ParamSet restore_params(const Checkpoint& ckpt, const ModelConfig& expected);

// Stored optimiser state, or fresh zeros when reset is set. Without reset, a
// checkpoint lacking optimiser state is an error.
AdamState restore_optimizer(const Checkpoint& ckpt, const ParamSet& params, bool reset);

}  // namespace salad
