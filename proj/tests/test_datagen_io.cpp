// Copyright (C) 2026 The salad authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "salad/checkpoint.hpp"
#include "salad/dataset.hpp"
#include "salad/error.hpp"

using namespace salad;
namespace fs = std::filesystem;

namespace {

SynthConfig small_synth(std::uint64_t seed) {
  SynthConfig c;
  c.num_videos = 6;
  c.min_frames = 40;
  c.max_frames = 60;
  c.feature_dim = 5;
  c.num_classes = 3;
  c.min_duration = 4;
  c.max_duration = 10;
  c.seed = seed;
  return c;
}

std::string dataset_text(const Dataset& ds) {
  std::ostringstream os;
  write_dataset(os, ds);
  return os.str();
}

fs::path temp_path(const std::string& name) { return fs::temp_directory_path() / ("salad_test_" + name); }

}  // namespace

TEST_CASE("generation is a pure function of the config") {
  const auto a = generate_synthetic(small_synth(3));
  const auto b = generate_synthetic(small_synth(3));
  CHECK(dataset_text(a) == dataset_text(b));
  CHECK(dataset_text(a) != dataset_text(generate_synthetic(small_synth(4))));
}

TEST_CASE("generated instances satisfy the ground-truth invariants") {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 30; ++rep) {
    SynthConfig c;
    c.num_videos = 3;
    c.min_frames = 30 + rng() % 40;
    c.max_frames = c.min_frames + rng() % 30;
    c.feature_dim = 3 + rng() % 6;
    c.num_classes = 1 + rng() % 3;
    c.min_instances = rng() % 2;
    c.max_instances = c.min_instances + rng() % 3;
    c.min_duration = 2 + rng() % 3;
    c.max_duration = c.min_duration + rng() % 6;
    c.snr = 1.0 + static_cast<double>(rng() % 5);
    c.frame_rate = (rng() % 2) ? 1.0 : 2.5;
    c.seed = rng();
    const auto ds = generate_synthetic(c);
    CHECK(ds.videos.size() == 3);
    for (const auto& v : ds.videos) {
      CHECK_NOTHROW(v.ground_truth.validate());
      CHECK(v.num_frames() >= c.min_frames);
      CHECK(v.num_frames() <= c.max_frames);
      CHECK(v.features.cols() == c.feature_dim);
      CHECK(v.ground_truth.video_length == doctest::Approx(v.duration()));
      const auto& inst = v.ground_truth.instances;
      CHECK(inst.size() >= c.min_instances);
      CHECK(inst.size() <= c.max_instances);
      for (std::size_t i = 0; i < inst.size(); ++i) {
        CHECK(inst[i].class_id >= 1);
        CHECK(inst[i].class_id <= static_cast<int>(c.num_classes));
        for (std::size_t j = i + 1; j < inst.size(); ++j) {
          const bool apart = inst[i].segment.end() < inst[j].segment.start() ||
                             inst[j].segment.end() < inst[i].segment.start();
          CHECK(apart);
        }
      }
    }
  }
}

TEST_CASE("zero instances gives background-only videos") {
  auto c = small_synth(1);
  c.min_instances = 0;
  c.max_instances = 0;
  const auto ds = generate_synthetic(c);
  for (const auto& v : ds.videos) CHECK(v.ground_truth.instances.empty());
}

TEST_CASE("infeasible packing names the video") {
  auto c = small_synth(1);
  c.min_frames = c.max_frames = 20;
  c.min_instances = c.max_instances = 4;
  c.min_duration = c.max_duration = 10;
  try {
    generate_synthetic(c);
    FAIL("expected an error");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("video 0") != std::string::npos);
  }
}

TEST_CASE("synth config validation") {
  auto c = small_synth(1);
  c.snr = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_synth(1);
  c.min_frames = 50;
  c.max_frames = 40;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

namespace {

struct FrameAccuracy {
  double all = 0.0;
  double full_envelope = 0.0;  // frames outside the ramp, or background
};

// Nearest-class-mean classifier fitted on half of the videos, scored on the rest.
FrameAccuracy nearest_mean_accuracy(const SynthConfig& c) {
  const auto ds = generate_synthetic(c);
  const auto [train, test] = split_dataset(ds, 0.5);

  auto label_of = [](const VideoSample& v, std::size_t t) {
    for (const auto& g : v.ground_truth.instances) {
      if (g.segment.contains(v.anchor(t))) return g.class_id;
    }
    return 0;
  };
  const std::size_t K = c.num_classes + 1;
  std::vector<std::vector<double>> mean(K, std::vector<double>(c.feature_dim, 0.0));
  std::vector<double> count(K, 0.0);
  for (const auto& v : train.videos) {
    for (std::size_t t = 0; t < v.num_frames(); ++t) {
      const int k = label_of(v, t);
      count[k] += 1.0;
      for (std::size_t d = 0; d < c.feature_dim; ++d) mean[k][d] += v.features(t, d);
    }
  }
  for (std::size_t k = 0; k < K; ++k)
    for (auto& m : mean[k]) m /= std::max(count[k], 1.0);

  auto in_ramp = [](const VideoSample& v, std::size_t t) {
    for (const auto& g : v.ground_truth.instances) {
      const double u = (v.anchor(t) - g.segment.start()) / g.segment.length();
      if (u >= 0.0 && u <= 1.0) return std::min(u, 1.0 - u) < 0.1;
    }
    return false;
  };
  std::size_t correct = 0, total = 0, correct_full = 0, total_full = 0;
  for (const auto& v : test.videos) {
    for (std::size_t t = 0; t < v.num_frames(); ++t) {
      std::size_t best = 0;
      double best_d = 1e300;
      for (std::size_t k = 0; k < K; ++k) {
        double d2 = 0.0;
        for (std::size_t d = 0; d < c.feature_dim; ++d) d2 += (v.features(t, d) - mean[k][d]) * (v.features(t, d) - mean[k][d]);
        if (d2 < best_d) {
          best_d = d2;
          best = k;
        }
      }
      const std::size_t hit = static_cast<int>(best) == label_of(v, t) ? 1 : 0;
      correct += hit;
      ++total;
      if (!in_ramp(v, t)) {
        correct_full += hit;
        ++total_full;
      }
    }
  }
  return {static_cast<double>(correct) / static_cast<double>(total),
          static_cast<double>(correct_full) / static_cast<double>(total_full)};
}

}  // namespace

TEST_CASE("high SNR makes a nearest-class-mean frame classifier near perfect") {
  SynthConfig c;
  c.num_videos = 40;
  c.min_frames = c.max_frames = 128;
  c.feature_dim = 16;
  c.num_classes = 3;
  c.snr = 100.0;
  c.seed = 12;
  // Short instances keep every frame's envelope at or above one half.
  c.min_duration = 6;
  c.max_duration = 10;
  CHECK(nearest_mean_accuracy(c).all >= 0.99);

  // Longer instances have ramp frames with a faint signal; only those may be missed.
  c.min_duration = 8;
  c.max_duration = 32;
  const auto acc = nearest_mean_accuracy(c);
  CHECK(acc.full_envelope >= 0.999);
  CHECK(acc.all >= 0.95);
}

TEST_CASE("dataset round trip is lossless") {
  const auto ds = generate_synthetic(small_synth(21));
  const auto path = temp_path("roundtrip.json");
  save_dataset(ds, path);
  const auto back = load_dataset(path);
  CHECK(back == ds);
  fs::remove(path);

  Dataset empty;
  empty.feature_dim = 4;
  empty.num_classes = 2;
  empty.class_names = {"a", "b"};
  std::stringstream ss;
  write_dataset(ss, empty);
  CHECK(read_dataset(ss) == empty);
}

TEST_CASE("loading rejects broken annotations and headers") {
  const std::string bad_interval =
      R"({"format":"salad-dataset","version":1,"feature_dim":1,"num_classes":1,"class_names":["a"],)"
      R"("videos":[{"id":"clip_7","frame_rate":1,"annotations":[{"start":1,"end":2,"class_id":1},)"
      R"({"start":3,"end":2,"class_id":1}],"features":[[0],[0],[0],[0]]}]})";
  std::istringstream in(bad_interval);
  try {
    read_dataset(in);
    FAIL("expected an error");
  } catch (const std::exception& e) {
    const std::string msg = e.what();
    CHECK(msg.find("clip_7") != std::string::npos);
    CHECK(msg.find("1") != std::string::npos);
  }
  std::istringstream version(R"({"format":"salad-dataset","version":9,"feature_dim":1,"num_classes":1,)"
                             R"("class_names":["a"],"videos":[]})");
  CHECK_THROWS_AS(read_dataset(version), IoError);
  std::istringstream garbage("not json");
  CHECK_THROWS_AS(read_dataset(garbage), IoError);
  CHECK_THROWS_AS(load_dataset(temp_path("does_not_exist.json")), IoError);
}

TEST_CASE("proposal CSV round trip") {
  VideoDetections dets;
  Proposal p;
  p.interval = Interval(0.1234567890123, 5.5);
  p.score = 1.0 / 3.0;
  p.class_id = 2;
  dets["v1"] = {p};
  dets["v2"] = {};
  std::stringstream ss;
  write_proposals(ss, dets);
  CHECK(ss.str().rfind("video_id,start,end,score,class_id\n", 0) == 0);
  const auto back = read_proposals(ss);
  REQUIRE(back.at("v1").size() == 1);
  CHECK(back.at("v1")[0].interval == p.interval);
  CHECK(back.at("v1")[0].score == p.score);
  CHECK(back.at("v1")[0].class_id == 2);
}

TEST_CASE("split is by index") {
  const auto ds = generate_synthetic(small_synth(2));
  const auto [a, b] = split_dataset(ds, 0.5);
  CHECK(a.videos.size() == 3);
  CHECK(b.videos.front().video_id == ds.videos[3].video_id);
}

TEST_CASE("checkpoint round trip and layout checks") {
  ModelConfig cfg{5, 8, 3, 6, 4, 1};
  Checkpoint c;
  c.model = cfg;
  c.run_config = "{\"train\":{}}";
  c.params = init_params(cfg);
  c.optimizer = AdamState::zeros_like(c.params);
  c.optimizer->m[0][0] = 0.125;
  c.optimizer->steps[2] = 7;
  c.step = 42;
  c.epoch = 3;
  BinaryMatrix alpha(4, 2);
  alpha.set(1, 1, true);
  c.frozen_alpha["v"] = alpha;

  const auto path = temp_path("ckpt.bin");
  save_checkpoint(c, path);
  const auto back = load_checkpoint(path);
  CHECK(back == c);
  fs::remove(path);

  std::stringstream ss;
  write_checkpoint(ss, c);
  CHECK(ss.str().rfind("SALADCKPT", 0) == 0);

  ModelConfig wider = cfg;
  wider.hidden_dim = 16;
  try {
    restore_params(c, wider);
    FAIL("expected a shape error");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("gru_fwd.w_hidden") != std::string::npos);
  }
  CHECK(restore_params(c, cfg) == c.params);

  Checkpoint bare = c;
  bare.optimizer.reset();
  CHECK_THROWS_AS(restore_optimizer(bare, bare.params, false), InvalidArgument);
  const auto fresh = restore_optimizer(bare, bare.params, true);
  CHECK(fresh == AdamState::zeros_like(bare.params));
  CHECK(restore_optimizer(c, c.params, false) == *c.optimizer);

  std::string bytes = ss.str();
  bytes[0] = 'X';
  std::istringstream bad(bytes);
  CHECK_THROWS_AS(read_checkpoint(bad), IoError);
  std::istringstream truncated(ss.str().substr(0, ss.str().size() / 2));
  CHECK_THROWS_AS(read_checkpoint(truncated), IoError);
}
