// Copyright (C) 2026 The salad authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "salad/assignment.hpp"
#include "salad/evaluation.hpp"
#include "salad/tensor.hpp"

namespace salad {

inline constexpr int kDatasetVersion = 1;

// One untrimmed video: T x D frame features plus annotations in seconds.
// Frame t is anchored at its centre, (t + 0.5) / frame_rate.
struct VideoSample {
  std::string video_id;
  ad::Tensor features;
  GroundTruthSet ground_truth;
  double frame_rate = 1.0;

  std::size_t num_frames() const noexcept { return features.rows(); }
  double anchor(std::size_t t) const noexcept { return (static_cast<double>(t) + 0.5) / frame_rate; }
  std::vector<double> anchors() const;
  double duration() const noexcept { return static_cast<double>(num_frames()) / frame_rate; }

  friend bool operator==(const VideoSample&, const VideoSample&) = default;
};

struct Dataset {
  std::size_t feature_dim = 0;
  std::size_t num_classes = 0;
  std::vector<std::string> class_names;
  std::vector<VideoSample> videos;

  VideoGroundTruth ground_truth() const;
  std::size_t num_instances() const;
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct SynthConfig {
  std::size_t num_videos = 250;
  std::size_t min_frames = 128;
  std::size_t max_frames = 128;
  std::size_t feature_dim = 16;
  std::size_t num_classes = 3;
  std::size_t min_instances = 1;
  std::size_t max_instances = 4;
  std::size_t min_duration = 8;  // frames
  std::size_t max_duration = 32;
  double snr = 5.0;
  double frame_rate = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Background frames are N(0, I); frames inside an instance of class c add
// snr * envelope * direction_c, where the directions are orthonormal and the
// envelope ramps linearly over the first and last 10% of the instance.
// Instances never overlap or touch. Throws InvalidArgument naming the video
// when the drawn durations cannot be packed.
Dataset generate_synthetic(const SynthConfig& cfg);

// JSON document; see README for the layout. Doubles are written with
// round-trip precision, so save/load is lossless.
void write_dataset(std::ostream& os, const Dataset& ds);
Dataset read_dataset(std::istream& is);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

// CSV with header video_id,start,end,score,class_id and 17 significant digits.
void write_proposals(std::ostream& os, const VideoDetections& dets);
VideoDetections read_proposals(std::istream& is);
void save_proposals(const VideoDetections& dets, const std::filesystem::path& path);
VideoDetections load_proposals(const std::filesystem::path& path);

// Deterministic split by index: the first round(train_fraction * n) videos
// train, the rest validate.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction);

}  // namespace salad
