// Copyright (C) 2026 The salad authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <iomanip>
#include <mutex>
#include <sstream>

#include "salad/error.hpp"
#include "salad/format.hpp"
#include "salad/parallel.hpp"
#include "salad/trainer.hpp"

namespace salad {

std::string_view to_string(AblationSuite s) {
  switch (s) {
    case AblationSuite::Pruning: return "pruning";
    case AblationSuite::SelfAssessment: return "self_assessment";
    case AblationSuite::Fusion: return "fusion";
  }
  return "?";
}

AblationSuite parse_ablation_suite(std::string_view name) {
  for (auto s : {AblationSuite::Pruning, AblationSuite::SelfAssessment, AblationSuite::Fusion}) {
    if (to_string(s) == name) return s;
  }
  throw InvalidArgument("unknown ablation suite '" + std::string(name) +
                        "' (valid suites: pruning, self_assessment, fusion)");
}

const AblationRow& AblationTable::row(std::string_view label) const {
  for (const auto& r : rows) {
    if (r.label == label) return r;
  }
  throw InvalidArgument("no ablation row labelled '" + std::string(label) + "'");
}

double AblationTable::mean_at(std::string_view label, double threshold) const {
  const auto& r = row(label);
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (std::abs(thresholds[i] - threshold) < 1e-12) return r.mean[i];
  }
  throw InvalidArgument("threshold not part of the ablation table");
}

std::string AblationTable::table() const {
  std::ostringstream os;
  os << "suite: " << to_string(suite) << ", seeds:";
  for (auto s : seeds) os << " " << s;
  os << ", training runs: " << training_runs << "\n";
  os << std::left << std::setw(26) << "mAP@tIoU" << std::right;
  for (double t : thresholds) os << std::setw(18) << std::fixed << std::setprecision(2) << t;
  os << "\n";
  for (const auto& r : rows) {
    os << std::left << std::setw(26) << r.label << std::right;
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(1) << 100.0 * r.mean[i] << " +- " << 100.0 * r.stddev[i];
      os << std::setw(18) << cell.str();
    }
    os << "\n";
  }
  return os.str();
}

std::string AblationTable::csv() const {
  std::ostringstream os;
  os << "variant,seed,threshold,map\n";
  for (const auto& r : rows) {
    for (std::size_t s = 0; s < r.map_per_seed.size(); ++s) {
      for (std::size_t i = 0; i < thresholds.size(); ++i) {
        os << r.label << "," << seeds[s] << "," << to_text(thresholds[i]) << "," << to_text(r.map_per_seed[s][i])
           << "\n";
      }
    }
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
      os << r.label << ",mean," << to_text(thresholds[i]) << "," << to_text(r.mean[i]) << "\n";
    }
  }
  return os.str();
}

namespace {

struct Variant {
  std::string label;
  SelfAssessVariant self_assessment = SelfAssessVariant::Salad;
  PruningVariant pruning = PruningVariant::Salad;
  FusionStrategy fusion = FusionStrategy::RegressionOnly;
};

std::vector<Variant> variants_of(AblationSuite suite) {
  using SA = SelfAssessVariant;
  using PV = PruningVariant;
  using FS = FusionStrategy;
  switch (suite) {
    case AblationSuite::Pruning:
      return {{"No Pruning", SA::Salad, PV::NoPruning},
              {"Top 1 IoU", SA::Salad, PV::Top1IoU},
              {"Random", SA::Salad, PV::Random},
              {"Frozen", SA::Salad, PV::Frozen},
              {"SALAD (pruning)", SA::Salad, PV::Salad}};
    case AblationSuite::SelfAssessment:
      return {{"y_t=1 <=> t=sigma(0)", SA::TopConfidence, PV::Salad},
              {"y_t=1 <=> p_t>0.5", SA::ConfidenceThreshold, PV::Salad},
              {"y_t=1 <=> tIoU_t>mu", SA::IoUThreshold, PV::Salad},
              {"SALAD", SA::Salad, PV::Salad}};
    case AblationSuite::Fusion:
      return {{"Arithmetic mean", SA::Salad, PV::Salad, FS::ArithmeticMean},
              {"Geometric mean", SA::Salad, PV::Salad, FS::GeometricMean},
              {"Normalized product", SA::Salad, PV::Salad, FS::NormalizedProduct},
              {"SALAD", SA::Salad, PV::Salad, FS::RegressionOnly}};
  }
  throw InvalidArgument("unknown ablation suite");
}

std::vector<double> maps_of(const EvalReport& report) {
  std::vector<double> out;
  for (const auto& r : report.results) out.push_back(r.map);
  return out;
}

void summarise(AblationRow& row, std::size_t n_thresholds) {
  row.mean.assign(n_thresholds, 0.0);
  row.stddev.assign(n_thresholds, 0.0);
  const double n = static_cast<double>(row.map_per_seed.size());
  if (n == 0) return;
  for (std::size_t i = 0; i < n_thresholds; ++i) {
    double s = 0.0;
    for (const auto& m : row.map_per_seed) s += m[i];
    row.mean[i] = s / n;
    double v = 0.0;
    for (const auto& m : row.map_per_seed) v += (m[i] - row.mean[i]) * (m[i] - row.mean[i]);
    row.stddev[i] = n > 1 ? std::sqrt(v / (n - 1)) : 0.0;
  }
}

}  // namespace

AblationTable run_ablation(const Dataset& dataset, const ModelConfig& model_cfg, const TrainConfig& cfg,
                           AblationSuite suite, std::span<const std::uint64_t> seeds, const AblationOptions& opts) {
  const bool rescore = suite == AblationSuite::Fusion && opts.checkpoint.has_value();
  if (seeds.empty() && !rescore) throw ConfigError("seeds", "at least one seed is required");
  cfg.validate();
  const std::size_t threads = opts.threads > 0 ? opts.threads : worker_count();
  const auto variants = variants_of(suite);

  AblationTable table;
  table.suite = suite;
  table.thresholds = cfg.eval_thresholds;
  table.seeds.assign(seeds.begin(), seeds.end());
  for (const auto& v : variants) {
    AblationRow row;
    row.label = v.label;
    row.map_per_seed.assign(seeds.size(), {});
    table.rows.push_back(std::move(row));
  }

  std::mutex progress_mutex;
  auto report = [&](const std::string& msg) {
    if (!opts.progress) return;
    std::lock_guard lock(progress_mutex);
    opts.progress(msg);
  };
  auto job_config = [&](const Variant& v, std::uint64_t seed) {
    TrainConfig c = cfg;
    c.seed = seed;
    c.threads = 1;
    c.self_assessment = v.self_assessment;
    c.pruning = v.pruning;
    c.inference.fusion = v.fusion;
    return c;
  };
  auto job_model = [&](std::uint64_t seed) {
    ModelConfig m = model_cfg;
    m.seed = seed;
    return m;
  };
  const auto val_set = split_dataset(dataset, cfg.train_fraction).second;

  if (suite == AblationSuite::Fusion) {
    std::vector<ParamSet> trained(seeds.size());
    std::vector<ModelConfig> configs(seeds.size());
    if (opts.checkpoint) {
      table.seeds = {opts.checkpoint->model.seed};
      for (auto& r : table.rows) r.map_per_seed.assign(1, {});
      trained.assign(1, restore_params(*opts.checkpoint, opts.checkpoint->model));
      configs.assign(1, opts.checkpoint->model);
    } else {
      parallel_for(seeds.size(), threads, [&](std::size_t s) {
        report("training SALAD, seed " + std::to_string(seeds[s]));
        configs[s] = job_model(seeds[s]);
        auto res = train(dataset, configs[s], job_config(variants.back(), seeds[s]));
        trained[s] = std::move(res.final_checkpoint.params);
      });
      table.training_runs = seeds.size();
    }
    const std::size_t jobs = trained.size() * variants.size();
    parallel_for(jobs, threads, [&](std::size_t j) {
      const std::size_t s = j / variants.size();
      const std::size_t v = j % variants.size();
      InferenceConfig inf = cfg.inference;
      inf.fusion = variants[v].fusion;
      const auto rep =
          evaluate(configs[s], trained[s], val_set.videos, inf, cfg.eval_thresholds, dataset.num_classes, 1);
      table.rows[v].map_per_seed[s] = maps_of(rep);
    });
  } else {
    // Everything except Frozen first; Frozen needs the finished SALAD runs.
    std::vector<std::pair<std::size_t, std::size_t>> jobs;  // (variant, seed index)
    std::size_t salad_row = variants.size();
    std::size_t frozen_row = variants.size();
    for (std::size_t v = 0; v < variants.size(); ++v) {
      if (variants[v].pruning == PruningVariant::Frozen) {
        frozen_row = v;
        continue;
      }
      if (variants[v].pruning == PruningVariant::Salad && variants[v].self_assessment == SelfAssessVariant::Salad) {
        salad_row = v;
      }
      for (std::size_t s = 0; s < seeds.size(); ++s) jobs.emplace_back(v, s);
    }
    std::vector<ParamSet> salad_params(seeds.size());
    parallel_for(jobs.size(), threads, [&](std::size_t j) {
      const auto [v, s] = jobs[j];
      report("training " + variants[v].label + ", seed " + std::to_string(seeds[s]));
      auto res = train(dataset, job_model(seeds[s]), job_config(variants[v], seeds[s]));
      table.rows[v].map_per_seed[s] = maps_of(res.final_report);
      if (v == salad_row) salad_params[s] = std::move(res.final_checkpoint.params);
    });
    table.training_runs = jobs.size();

    if (frozen_row < variants.size()) {
      const auto train_set = split_dataset(dataset, cfg.train_fraction).first;
      parallel_for(seeds.size(), threads, [&](std::size_t s) {
        report("training Frozen, seed " + std::to_string(seeds[s]));
        TrainOptions o;
        o.frozen_alpha = capture_alpha(job_model(seeds[s]), salad_params[s], train_set.videos, cfg.weights.mu, 1);
        auto res = train(dataset, job_model(seeds[s]), job_config(variants[frozen_row], seeds[s]), o);
        table.rows[frozen_row].map_per_seed[s] = maps_of(res.final_report);
      });
      table.training_runs += seeds.size();
    }
  }
  for (auto& r : table.rows) summarise(r, table.thresholds.size());
  return table;
}

}  // namespace salad
