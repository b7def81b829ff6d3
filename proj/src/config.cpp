// Copyright (C) 2026 The salad authors
// SPDX-License-Identifier: Apache-2.0

#include "salad/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "salad/error.hpp"

namespace salad {

using nlohmann::json;

std::string_view to_string(ClassLoss k) {
  return k == ClassLoss::PerClassBinary ? "per_class_binary" : "categorical";
}

ClassLoss parse_class_loss(std::string_view name) {
  if (name == "per_class_binary") return ClassLoss::PerClassBinary;
  if (name == "categorical") return ClassLoss::Categorical;
  throw InvalidArgument("unknown class loss '" + std::string(name) + "' (valid: per_class_binary, categorical)");
}

namespace {

// Reads keys of one section, remembering which were consumed.
class Section {
 public:
  Section(const json& root, std::string name) : name_(std::move(name)) {
    if (!root.contains(name_)) return;
    obj_ = &root.at(name_);
    if (!obj_->is_object()) throw ConfigError(name_, "must be an object");
  }

  bool has(const std::string& key) const { return obj_ && obj_->contains(key); }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    seen_.insert(key);
    const json& v = obj_->at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(field(key), "expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError(field(key), "expected an integer");
        if (std::is_unsigned_v<T> && v.get<long long>() < 0 && !v.is_number_unsigned()) {
          throw ConfigError(field(key), "must be non-negative");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError(field(key), "expected a number");
      }
      out = v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(field(key), e.what());
    }
  }

  template <typename Enum, typename Parse>
  void get_enum(const std::string& key, Enum& out, Parse parse) {
    if (!has(key)) return;
    std::string s;
    get(key, s);
    try {
      out = parse(s);
    } catch (const InvalidArgument& e) {
      throw ConfigError(field(key), e.what());
    }
  }

  void reject_unknown() const {
    if (!obj_) return;
    for (const auto& [k, _] : obj_->items()) {
      if (!seen_.count(k)) throw ConfigError(field(k), "unknown key");
    }
  }

  std::string field(const std::string& key) const { return name_ + "." + key; }

 private:
  std::string name_;
  const json* obj_ = nullptr;
  std::set<std::string> seen_;
};

void apply_override(json& root, const std::string& item) {
  const auto eq = item.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError(item, "override must look like section.key=value");
  const std::string path = item.substr(0, eq);
  const std::string text = item.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &root;
  std::size_t pos = 0;
  while (true) {
    const auto dot = path.find('.', pos);
    const std::string key = path.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (key.empty()) throw ConfigError(path, "empty key in override");
    if (!node->is_object()) throw ConfigError(path, "override path crosses a non-object");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = json::object();
    pos = dot + 1;
  }
}

RunConfig from_json(const json& root) {
  if (!root.is_object()) throw ConfigError("", "configuration must be a JSON object");
  static const std::set<std::string> sections{"synth", "model", "train", "inference", "eval"};
  for (const auto& [k, _] : root.items()) {
    if (!sections.count(k)) throw ConfigError(k, "unknown section (valid: synth, model, train, inference, eval)");
  }

  RunConfig c;
  Section synth(root, "synth");
  auto& s = c.synth;
  synth.get("num_videos", s.num_videos);
  synth.get("min_frames", s.min_frames);
  synth.get("max_frames", s.max_frames);
  synth.get("feature_dim", s.feature_dim);
  synth.get("num_classes", s.num_classes);
  synth.get("min_instances", s.min_instances);
  synth.get("max_instances", s.max_instances);
  synth.get("min_duration", s.min_duration);
  synth.get("max_duration", s.max_duration);
  synth.get("snr", s.snr);
  synth.get("frame_rate", s.frame_rate);
  if (synth.has("seed")) {
    std::uint64_t seed = 0;
    synth.get("seed", seed);
    c.synth_seed = seed;
  }
  synth.reject_unknown();

  Section model(root, "model");
  model.get("hidden_dim", c.model.hidden_dim);
  model.get("head_width1", c.model.head_width1);
  model.get("head_width2", c.model.head_width2);
  model.reject_unknown();

  Section train(root, "train");
  auto& t = c.train;
  train.get("epochs", t.epochs);
  train.get("pretrain_epochs", t.pretrain_epochs);
  train.get("batch_size", t.batch_size);
  train.get("learning_rate", t.learning_rate);
  train.get("lambda1", t.weights.lambda1);
  train.get("lambda2", t.weights.lambda2);
  train.get("mu", t.weights.mu);
  train.get_enum("self_assessment", t.self_assessment, parse_self_assess_variant);
  train.get_enum("pruning", t.pruning, parse_pruning_variant);
  train.get_enum("class_loss", t.class_loss, parse_class_loss);
  train.get("batch_mean", t.batch_mean);
  train.get("grad_clip", t.grad_clip);
  train.get("train_fraction", t.train_fraction);
  train.get("eval_every", t.eval_every);
  train.get("threads", t.threads);
  if (train.has("seed")) {
    std::uint64_t seed = 0;
    train.get("seed", seed);
    c.train_seed = seed;
  }
  train.reject_unknown();

  Section inf(root, "inference");
  auto& i = c.inference;
  inf.get_enum("fusion", i.fusion, parse_fusion);
  inf.get("zeta", i.zeta);
  inf.get("sigma_nms", i.sigma_nms);
  inf.get("min_score", i.min_score);
  inf.get("per_class", i.per_class);
  inf.get("top_k", i.top_k);
  inf.reject_unknown();

  Section ev(root, "eval");
  if (ev.has("preset") && ev.has("thresholds")) throw ConfigError("eval", "give either preset or thresholds, not both");
  if (ev.has("preset")) {
    std::string preset;
    ev.get("preset", preset);
    try {
      c.eval_thresholds = threshold_preset(preset);
    } catch (const InvalidArgument& e) {
      throw ConfigError("eval.preset", e.what());
    }
  }
  ev.get("thresholds", c.eval_thresholds);
  ev.reject_unknown();

  c.train.inference = c.inference;
  c.train.eval_thresholds = c.eval_thresholds;
  if (c.train_seed) c.train.seed = *c.train_seed;
  if (c.synth_seed) c.synth.seed = *c.synth_seed;
  c.validate();
  return c;
}

}  // namespace

SynthConfig RunConfig::synth_config() const {
  if (!synth_seed) throw ConfigError("synth.seed", "required field is missing");
  SynthConfig s = synth;
  s.seed = *synth_seed;
  return s;
}

TrainConfig RunConfig::train_config() const {
  if (!train_seed) throw ConfigError("train.seed", "required field is missing");
  TrainConfig t = train;
  t.seed = *train_seed;
  t.inference = inference;
  t.eval_thresholds = eval_thresholds;
  return t;
}

ModelConfig RunConfig::model_config(const Dataset& ds) const {
  ModelConfig m = model;
  m.feature_dim = ds.feature_dim;
  m.num_classes = ds.num_classes;
  m.seed = train_seed.value_or(0);
  m.validate();
  return m;
}

void RunConfig::validate() const {
  synth.validate();
  model.validate();
  train.validate();
  inference.validate();
  if (eval_thresholds.empty()) throw ConfigError("eval.thresholds", "must not be empty");
  for (double th : eval_thresholds) {
    if (!(th > 0.0 && th <= 1.0)) throw ConfigError("eval.thresholds", "every threshold must lie in (0, 1]");
  }
}

std::string RunConfig::to_json() const {
  json j;
  j["synth"] = {{"num_videos", synth.num_videos},       {"min_frames", synth.min_frames},
                {"max_frames", synth.max_frames},       {"feature_dim", synth.feature_dim},
                {"num_classes", synth.num_classes},     {"min_instances", synth.min_instances},
                {"max_instances", synth.max_instances}, {"min_duration", synth.min_duration},
                {"max_duration", synth.max_duration},   {"snr", synth.snr},
                {"frame_rate", synth.frame_rate}};
  if (synth_seed) j["synth"]["seed"] = *synth_seed;
  j["model"] = {{"hidden_dim", model.hidden_dim}, {"head_width1", model.head_width1}, {"head_width2", model.head_width2}};
  j["train"] = {{"epochs", train.epochs},
                {"pretrain_epochs", train.pretrain_epochs},
                {"batch_size", train.batch_size},
                {"learning_rate", train.learning_rate},
                {"lambda1", train.weights.lambda1},
                {"lambda2", train.weights.lambda2},
                {"mu", train.weights.mu},
                {"self_assessment", to_string(train.self_assessment)},
                {"pruning", to_string(train.pruning)},
                {"class_loss", to_string(train.class_loss)},
                {"batch_mean", train.batch_mean},
                {"grad_clip", train.grad_clip},
                {"train_fraction", train.train_fraction},
                {"eval_every", train.eval_every},
                {"threads", train.threads}};
  if (train_seed) j["train"]["seed"] = *train_seed;
  j["inference"] = {{"fusion", to_string(inference.fusion)}, {"zeta", inference.zeta},
                    {"sigma_nms", inference.sigma_nms},     {"min_score", inference.min_score},
                    {"per_class", inference.per_class},     {"top_k", inference.top_k}};
  j["eval"] = {{"thresholds", eval_thresholds}};
  return j.dump(2) + "\n";
}

RunConfig parse_run_config(std::string_view json_text, const std::vector<std::string>& overrides) {
  json root = json::parse(json_text.begin(), json_text.end(), nullptr, false);
  if (root.is_discarded()) throw ConfigError("", "configuration is not valid JSON");
  for (const auto& o : overrides) apply_override(root, o);
  return from_json(root);
}

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), overrides);
}

}  // namespace salad
