// Copyright (C) 2026 The salad authors
// SPDX-License-Identifier: Apache-2.0

#include "salad/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "salad/error.hpp"
#include "salad/format.hpp"

namespace salad {

namespace {

std::vector<std::size_t> by_score(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

std::vector<bool> match_detections(std::span<const Proposal> dets, const GroundTruthSet& gts, double thresh) {
  std::vector<double> scores(dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) scores[i] = dets[i].score;
  std::vector<bool> flags(dets.size(), false);
  std::vector<bool> taken(gts.size(), false);
  for (std::size_t i : by_score(scores)) {
    double best = -1.0;
    std::size_t best_gt = gts.size();
    for (std::size_t n = 0; n < gts.size(); ++n) {
      if (taken[n] || gts.instances[n].class_id != dets[i].class_id) continue;
      const double o = tiou(dets[i].interval, gts.instances[n].segment);
      if (o > best) {
        best = o;
        best_gt = n;
      }
    }
    if (best_gt < gts.size() && best >= thresh) {
      taken[best_gt] = true;
      flags[i] = true;
    }
  }
  return flags;
}

double average_precision(const std::vector<bool>& flags, std::span<const double> scores, long n_gt) {
  if (n_gt < 0) throw InvalidArgument("average_precision: n_gt must be >= 0");
  if (flags.size() != scores.size()) throw InvalidArgument("average_precision: flags and scores differ in length");
  if (n_gt == 0) return 0.0;
  double ap = 0.0;
  std::size_t tp = 0;
  std::size_t seen = 0;
  for (std::size_t i : by_score(scores)) {
    ++seen;
    if (flags[i]) {
      ++tp;
      ap += static_cast<double>(tp) / static_cast<double>(seen);
    }
  }
  return ap / static_cast<double>(n_gt);
}

std::vector<double> threshold_preset(std::string_view name) {
  if (name == "thumos") return {0.1, 0.2, 0.3, 0.4, 0.5};
  if (name == "anet") return {0.5, 0.75, 0.95};
  throw InvalidArgument("unknown threshold preset '" + std::string(name) + "' (expected thumos, anet)");
}

EvalReport map_at_thresholds(const VideoDetections& dets, const VideoGroundTruth& gts,
                             std::span<const double> thresholds, std::size_t num_classes) {
  for (const auto& [vid, _] : dets) {
    if (!gts.contains(vid)) throw InvalidArgument("detections reference unknown video '" + vid + "'");
  }
  std::set<int> classes;
  if (num_classes > 0) {
    for (std::size_t c = 1; c <= num_classes; ++c) classes.insert(static_cast<int>(c));
  } else {
    for (const auto& [_, g] : gts) {
      for (const auto& inst : g.instances) classes.insert(inst.class_id);
    }
    for (const auto& [_, d] : dets) {
      for (const auto& p : d) classes.insert(p.class_id);
    }
  }

  EvalReport report;
  for (double thr : thresholds) {
    ThresholdResult res;
    res.threshold = thr;
    double sum = 0.0;
    std::size_t counted = 0;
    for (int c : classes) {
      ClassResult cr;
      cr.class_id = c;
      std::vector<bool> flags;
      std::vector<double> scores;
      for (const auto& [vid, g] : gts) {
        GroundTruthSet class_gt;
        class_gt.video_length = g.video_length;
        for (const auto& inst : g.instances) {
          if (inst.class_id == c) class_gt.instances.push_back(inst);
        }
        cr.num_gt += class_gt.size();
        const auto it = dets.find(vid);
        if (it == dets.end()) continue;
        std::vector<Proposal> class_dets;
        for (const auto& p : it->second) {
          if (p.class_id == c) class_dets.push_back(p);
        }
        const auto f = match_detections(class_dets, class_gt, thr);
        for (std::size_t i = 0; i < class_dets.size(); ++i) {
          flags.push_back(f[i]);
          scores.push_back(class_dets[i].score);
        }
      }
      cr.num_tp = static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true));
      cr.num_fp = flags.size() - cr.num_tp;
      cr.ap = average_precision(flags, scores, static_cast<long>(cr.num_gt));
      if (cr.num_gt > 0) {
        sum += cr.ap;
        ++counted;
      }
      res.classes.push_back(cr);
    }
    res.map = counted > 0 ? sum / static_cast<double>(counted) : 0.0;
    report.results.push_back(std::move(res));
  }
  return report;
}

double EvalReport::map_at(double threshold) const {
  for (const auto& r : results) {
    if (std::abs(r.threshold - threshold) < 1e-12) return r.map;
  }
  throw InvalidArgument("threshold " + std::to_string(threshold) + " was not evaluated");
}

std::string EvalReport::table() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "tIoU    mAP\n";
  for (const auto& r : results) os << std::setw(6) << std::setprecision(2) << r.threshold << "  "
                                   << std::setprecision(4) << r.map << "\n";
  for (const auto& r : results) {
    os << "\nper-class AP @ tIoU " << std::setprecision(2) << r.threshold << "\n";
    os << "class     gt     tp     fp      AP\n";
    for (const auto& c : r.classes) {
      os << std::setw(5) << c.class_id << std::setw(7) << c.num_gt << std::setw(7) << c.num_tp << std::setw(7)
         << c.num_fp << "  " << std::setprecision(4) << c.ap << "\n";
    }
  }
  return os.str();
}

std::string EvalReport::csv() const {
  std::ostringstream os;
  os << "threshold,class_id,num_gt,num_tp,num_fp,ap\n";
  for (const auto& r : results) {
    for (const auto& c : r.classes) {
      os << to_text(r.threshold) << "," << c.class_id << "," << c.num_gt << "," << c.num_tp << "," << c.num_fp
         << "," << to_text(c.ap) << "\n";
    }
    os << to_text(r.threshold) << ",mAP,,,," << to_text(r.map) << "\n";
  }
  return os.str();
}

}  // namespace salad
