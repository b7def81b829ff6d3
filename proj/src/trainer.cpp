// Copyright (C) 2026 The salad authors
// SPDX-License-Identifier: Apache-2.0

#include "salad/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "salad/error.hpp"
#include "salad/parallel.hpp"

namespace salad {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train.batch_size", "must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate", "must be > 0");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) throw ConfigError("train.train_fraction", "must lie in (0, 1]");
  if (grad_clip < 0.0) throw ConfigError("train.grad_clip", "must be >= 0");
  for (double t : eval_thresholds) {
    if (!(t > 0.0 && t <= 1.0)) throw ConfigError("eval.thresholds", "thresholds must lie in (0, 1]");
  }
  weights.validate();
  inference.validate();
}

std::string EpochRecord::to_json() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["phase"] = phase;
  j["step"] = step;
  j["train_loss"] = train_loss;
  j["loss_rsa"] = loss_rsa;
  j["loss_cls"] = loss_cls;
  j["sum_y"] = sum_y;
  j["pruned_fraction"] = pruned_fraction;
  auto maps = nlohmann::ordered_json::array();
  for (const auto& [thr, m] : val_map) maps.push_back({{"threshold", thr}, {"map", m}});
  j["val_map"] = maps;
  return j.dump();
}

std::optional<double> EpochRecord::map_at(double threshold) const {
  for (const auto& [thr, m] : val_map) {
    if (std::abs(thr - threshold) < 1e-12) return m;
  }
  return std::nullopt;
}

namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<FramePrediction> predictions_from(const ModelOutputs& out, const VideoSample& video) {
  const auto& off = out.offsets.value();
  const auto& conf = out.confidence.value();
  const auto& probs = out.class_probs.value();
  const double scale = video.duration();
  std::vector<FramePrediction> preds(video.num_frames());
  for (std::size_t t = 0; t < preds.size(); ++t) {
    auto& p = preds[t];
    p.t = video.anchor(t);
    p.interval = segment_from_offsets(p.t, OffsetPair(off(t, 0), off(t, 1)), scale);
    p.p_hat = conf[t];
    p.class_dist.assign(probs.data().begin() + static_cast<std::ptrdiff_t>(t * probs.cols()),
                        probs.data().begin() + static_cast<std::ptrdiff_t>((t + 1) * probs.cols()));
  }
  return preds;
}

struct VideoStep {
  ParamSet grads;
  double loss = 0.0;
  double rsa = 0.0;
  double cls = 0.0;
  std::size_t sum_y = 0;
  std::size_t pruned = 0;
  std::size_t inside = 0;
};

VideoStep video_step(const ModelConfig& mcfg, const TrainConfig& cfg, const ParamSet& params,
                     const VideoSample& video, bool pretrain, std::uint64_t rng_seed,
                     const std::map<std::string, BinaryMatrix>& frozen) {
  VideoStep r;
  const auto bound = BoundParams::bind(params, true);
  const auto out = forward(mcfg, video.features, bound);
  const auto anchors = video.anchors();
  const auto& gts = video.ground_truth;
  const auto labels = FrameLabels::from_ground_truth(anchors, gts);
  const auto cls = loss_cls(out.class_probs, labels, cfg.class_loss);
  r.cls = cls.value().item();

  ad::Var loss = cls;
  if (!pretrain) {
    const auto preds = predictions_from(out, video);
    auto status = assign_variant(cfg.self_assessment, preds, gts, cfg.weights.mu);
    std::optional<BinaryMatrix> frozen_alpha;
    if (cfg.pruning == PruningVariant::Frozen) {
      const auto it = frozen.find(video.video_id);
      if (it == frozen.end()) throw InvalidArgument("no frozen alpha for video " + video.video_id);
      frozen_alpha = it->second;
    }
    status = apply_pruning_variant(cfg.pruning, std::move(status), preds, gts, rng_seed, frozen_alpha);
    const auto segments = segments_from_offsets(out.offsets, anchors, video.duration());
    const auto rsa = loss_rsa(segments, out.confidence, gts, status, cfg.weights.lambda1);
    r.rsa = rsa.value().item();
    loss = loss_total(rsa, cls, cfg.weights.lambda2);
    r.sum_y = status.positives();
    r.pruned = count_pruned(status, preds, gts);
    const auto inside = containment(preds, gts);
    for (std::size_t t = 0; t < preds.size(); ++t) r.inside += inside.row_any(t) ? 1 : 0;
  }
  r.loss = loss.value().item();
  if (!std::isfinite(r.loss)) return r;
  ad::backward(loss);
  r.grads = bound.gradients();
  return r;
}

std::vector<bool> active_mask(const ParamSet& params, bool pretrain) {
  std::vector<bool> mask(params.size(), true);
  if (!pretrain) return mask;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto g = group_of(params.name(i));
    mask[i] = g == ParamGroup::Encoder || g == ParamGroup::Classification;
  }
  return mask;
}

double selection_threshold(const std::vector<double>& thresholds) {
  for (double t : thresholds) {
    if (std::abs(t - 0.5) < 1e-12) return 0.5;
  }
  return thresholds.empty() ? 0.5 : thresholds.back();
}

}  // namespace

std::vector<FramePrediction> predict(const ModelConfig& cfg, const ParamSet& params, const VideoSample& video) {
  const auto bound = BoundParams::bind(params, false);
  return predictions_from(forward(cfg, video.features, bound), video);
}

VideoDetections detect_videos(const ModelConfig& cfg, const ParamSet& params, std::span<const VideoSample> videos,
                              const InferenceConfig& inference, std::size_t threads) {
  std::vector<std::vector<Proposal>> per_video(videos.size());
  parallel_for(videos.size(), threads, [&](std::size_t i) {
    per_video[i] = detect(predict(cfg, params, videos[i]), videos[i].duration(), inference);
  });
  VideoDetections out;
  for (std::size_t i = 0; i < videos.size(); ++i) out[videos[i].video_id] = std::move(per_video[i]);
  return out;
}

EvalReport evaluate(const ModelConfig& cfg, const ParamSet& params, std::span<const VideoSample> videos,
                    const InferenceConfig& inference, std::span<const double> thresholds, std::size_t num_classes,
                    std::size_t threads) {
  VideoGroundTruth gts;
  for (const auto& v : videos) gts.emplace(v.video_id, v.ground_truth);
  return map_at_thresholds(detect_videos(cfg, params, videos, inference, threads), gts, thresholds, num_classes);
}

std::map<std::string, BinaryMatrix> capture_alpha(const ModelConfig& cfg, const ParamSet& params,
                                                  std::span<const VideoSample> videos, double mu,
                                                  std::size_t threads) {
  std::vector<BinaryMatrix> alphas(videos.size());
  parallel_for(videos.size(), threads, [&](std::size_t i) {
    alphas[i] = assign_salad(predict(cfg, params, videos[i]), videos[i].ground_truth, mu).alpha;
  });
  std::map<std::string, BinaryMatrix> out;
  for (std::size_t i = 0; i < videos.size(); ++i) out.emplace(videos[i].video_id, std::move(alphas[i]));
  return out;
}

TrainResult train(const Dataset& dataset, const ModelConfig& model_cfg, const TrainConfig& cfg,
                  const TrainOptions& opts) {
  cfg.validate();
  model_cfg.validate();
  if (dataset.feature_dim != model_cfg.feature_dim) {
    throw ConfigError("model.feature_dim", "dataset has feature_dim " + std::to_string(dataset.feature_dim));
  }
  if (dataset.num_classes != model_cfg.num_classes) {
    throw ConfigError("model.num_classes", "dataset has " + std::to_string(dataset.num_classes) + " classes");
  }
  const std::size_t threads = cfg.threads > 0 ? cfg.threads : worker_count();
  auto [train_set, val_set] = split_dataset(dataset, cfg.train_fraction);
  if (train_set.videos.empty()) throw ConfigError("train.train_fraction", "leaves no training videos");

  ParamSet params;
  AdamState adam;
  std::uint64_t step = 0;
  std::size_t done_epochs = 0;
  if (opts.resume) {
    params = restore_params(*opts.resume, model_cfg);
    adam = restore_optimizer(*opts.resume, params, opts.reset_optimizer);
    step = opts.resume->step;
    done_epochs = opts.resume->epoch;
  } else {
    params = init_params(model_cfg);
    adam = AdamState::zeros_like(params);
  }
  const AdamConfig adam_cfg{cfg.learning_rate, 0.9, 0.999, 1e-8};

  TrainResult result;
  result.best_threshold = selection_threshold(cfg.eval_thresholds);
  auto snapshot = [&](std::size_t epoch) {
    Checkpoint c;
    c.model = model_cfg;
    c.run_config = opts.run_config;
    c.params = params;
    c.optimizer = adam;
    c.step = step;
    c.epoch = epoch;
    c.frozen_alpha = opts.frozen_alpha;
    return c;
  };

  const std::size_t total_epochs = cfg.pretrain_epochs + cfg.epochs;
  for (std::size_t epoch = done_epochs + 1; epoch <= total_epochs; ++epoch) {
    const bool pretrain = epoch <= cfg.pretrain_epochs;
    const auto mask = active_mask(params, pretrain);

    std::vector<std::size_t> order(train_set.videos.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.phase = pretrain ? "pretrain" : "joint";
    std::size_t pruned = 0;
    std::size_t inside = 0;
    for (std::size_t b = 0; b * cfg.batch_size < order.size(); ++b) {
      const std::size_t begin = b * cfg.batch_size;
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      std::vector<VideoStep> steps(end - begin);
      parallel_for(steps.size(), threads, [&](std::size_t k) {
        const std::size_t vid = order[begin + k];
        steps[k] = video_step(model_cfg, cfg, params, train_set.videos[vid], pretrain,
                              mix_seed(cfg.seed ^ 0x5a5a5a5aULL, step * 1000003ULL + vid), opts.frozen_alpha);
      });
      ParamSet grads = params.zeros_like();
      for (std::size_t k = 0; k < steps.size(); ++k) {
        const auto& s = steps[k];
        if (!std::isfinite(s.loss)) {
          throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) +
                             " (video " + train_set.videos[order[begin + k]].video_id + ")");
        }
        grads.add_scaled(s.grads, 1.0);
        rec.train_loss += s.loss;
        rec.loss_rsa += s.rsa;
        rec.loss_cls += s.cls;
        rec.sum_y += s.sum_y;
        pruned += s.pruned;
        inside += s.inside;
      }
      if (cfg.batch_mean) {
        for (std::size_t i = 0; i < grads.size(); ++i) grads[i].mat() /= static_cast<double>(steps.size());
      }
      if (cfg.grad_clip > 0.0) clip_global_norm(grads, cfg.grad_clip);
      adam_step(params, grads, adam, adam_cfg, mask);
      ++step;
    }
    rec.step = step;
    rec.pruned_fraction = inside > 0 ? static_cast<double>(pruned) / static_cast<double>(inside) : 0.0;

    const bool last = epoch == total_epochs;
    if (!val_set.videos.empty() && !cfg.eval_thresholds.empty() &&
        ((cfg.eval_every > 0 && epoch % cfg.eval_every == 0) || last)) {
      const auto report = evaluate(model_cfg, params, val_set.videos, cfg.inference, cfg.eval_thresholds,
                                   dataset.num_classes, threads);
      for (const auto& r : report.results) rec.val_map.emplace_back(r.threshold, r.map);
      const double m = report.map_at(result.best_threshold);
      if (m > result.best_map) {
        result.best_map = m;
        result.best_checkpoint = snapshot(epoch);
      }
      if (last) result.final_report = report;
    }
    result.log.push_back(rec);
    if (opts.on_epoch) opts.on_epoch(rec, params);
  }

  result.final_checkpoint = snapshot(std::max(total_epochs, done_epochs));
  if (result.best_map < 0.0) result.best_checkpoint = result.final_checkpoint;
  return result;
}

}  // namespace salad
