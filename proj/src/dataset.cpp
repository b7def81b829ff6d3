// Copyright (C) 2026 The salad authors
// SPDX-License-Identifier: Apache-2.0

#include "salad/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <Eigen/QR>
#include <json.hpp>

#include "salad/error.hpp"
#include "salad/format.hpp"

namespace salad {

using nlohmann::json;

std::vector<double> VideoSample::anchors() const {
  std::vector<double> a(num_frames());
  for (std::size_t t = 0; t < a.size(); ++t) a[t] = anchor(t);
  return a;
}

VideoGroundTruth Dataset::ground_truth() const {
  VideoGroundTruth out;
  for (const auto& v : videos) out.emplace(v.video_id, v.ground_truth);
  return out;
}

std::size_t Dataset::num_instances() const {
  std::size_t n = 0;
  for (const auto& v : videos) n += v.ground_truth.size();
  return n;
}

void SynthConfig::validate() const {
  if (min_frames < 1 || min_frames > max_frames) throw ConfigError("synth.min_frames", "need 1 <= min_frames <= max_frames");
  if (feature_dim < 1) throw ConfigError("synth.feature_dim", "must be >= 1");
  if (num_classes < 1) throw ConfigError("synth.num_classes", "must be >= 1");
  if (num_classes > feature_dim) throw ConfigError("synth.num_classes", "cannot exceed feature_dim");
  if (min_instances > max_instances) throw ConfigError("synth.min_instances", "exceeds max_instances");
  if (min_duration < 1 || min_duration > max_duration) {
    throw ConfigError("synth.min_duration", "need 1 <= min_duration <= max_duration");
  }
  if (!(snr > 0.0) || !std::isfinite(snr)) throw ConfigError("synth.snr", "must be > 0");
  if (!(frame_rate > 0.0) || !std::isfinite(frame_rate)) throw ConfigError("synth.frame_rate", "must be > 0");
}

Dataset generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const auto dim = static_cast<Eigen::Index>(cfg.feature_dim);
  Eigen::MatrixXd raw(dim, dim);
  for (Eigen::Index i = 0; i < raw.size(); ++i) raw.data()[i] = gauss(rng);
  const Eigen::MatrixXd basis = Eigen::HouseholderQR<Eigen::MatrixXd>(raw).householderQ();

  Dataset ds;
  ds.feature_dim = cfg.feature_dim;
  ds.num_classes = cfg.num_classes;
  for (std::size_t c = 1; c <= cfg.num_classes; ++c) ds.class_names.push_back("class_" + std::to_string(c));

  for (std::size_t v = 0; v < cfg.num_videos; ++v) {
    const auto frames = std::uniform_int_distribution<std::size_t>(cfg.min_frames, cfg.max_frames)(rng);
    const auto count = std::uniform_int_distribution<std::size_t>(cfg.min_instances, cfg.max_instances)(rng);
    std::vector<std::size_t> durations(count);
    for (auto& d : durations) d = std::uniform_int_distribution<std::size_t>(cfg.min_duration, cfg.max_duration)(rng);
    std::size_t needed = 0;
    for (auto d : durations) needed += d;
    if (count > 1) needed += count - 1;  // at least one background frame between instances
    if (needed > frames) {
      throw InvalidArgument("video " + std::to_string(v) + ": cannot pack " + std::to_string(count) +
                            " instances needing " + std::to_string(needed) + " frames into " + std::to_string(frames));
    }
    // Spread the slack over the count + 1 gaps.
    const std::size_t slack = frames - needed;
    std::vector<std::size_t> cuts(count);
    for (auto& c : cuts) c = std::uniform_int_distribution<std::size_t>(0, slack)(rng);
    std::sort(cuts.begin(), cuts.end());

    VideoSample video;
    video.video_id = "video_" + std::to_string(v);
    video.frame_rate = cfg.frame_rate;
    video.features = ad::Tensor::matrix(frames, cfg.feature_dim);
    video.ground_truth.video_length = static_cast<double>(frames) / cfg.frame_rate;

    std::size_t cursor = 0;
    std::size_t prev_cut = 0;
    std::vector<std::pair<std::size_t, std::size_t>> spans;  // [begin, end) in frames
    for (std::size_t i = 0; i < count; ++i) {
      cursor += cuts[i] - prev_cut;
      prev_cut = cuts[i];
      spans.emplace_back(cursor, cursor + durations[i]);
      cursor += durations[i] + 1;
    }
    for (const auto& [b, e] : spans) {
      const int cls = std::uniform_int_distribution<int>(1, static_cast<int>(cfg.num_classes))(rng);
      video.ground_truth.instances.push_back(
          {Interval(static_cast<double>(b) / cfg.frame_rate, static_cast<double>(e) / cfg.frame_rate), cls});
    }
    auto feats = video.features.mat();
    for (Eigen::Index i = 0; i < feats.size(); ++i) feats.data()[i] = gauss(rng);
    for (std::size_t i = 0; i < spans.size(); ++i) {
      const auto [b, e] = spans[i];
      const int cls = video.ground_truth.instances[i].class_id;
      const double len = static_cast<double>(e - b);
      for (std::size_t t = b; t < e; ++t) {
        const double u = (static_cast<double>(t - b) + 0.5) / len;
        const double env = std::min({1.0, u / 0.1, (1.0 - u) / 0.1});
        feats.row(static_cast<Eigen::Index>(t)) += cfg.snr * env * basis.col(cls - 1).transpose();
      }
    }
    ds.videos.push_back(std::move(video));
  }
  return ds;
}

namespace {

double finite_number(const json& j, const std::string& what) {
  if (!j.is_number()) throw IoError(what + ": expected a finite number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw IoError(what + ": non-finite value");
  return v;
}

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw IoError(where + ": missing field '" + key + "'");
  return obj.at(key);
}

}  // namespace

void write_dataset(std::ostream& os, const Dataset& ds) {
  json doc;
  doc["format"] = "salad-dataset";
  doc["version"] = kDatasetVersion;
  doc["feature_dim"] = ds.feature_dim;
  doc["num_classes"] = ds.num_classes;
  doc["class_names"] = ds.class_names;
  doc["videos"] = json::array();
  for (const auto& v : ds.videos) {
    json jv;
    jv["id"] = v.video_id;
    jv["frame_rate"] = v.frame_rate;
    jv["annotations"] = json::array();
    for (const auto& g : v.ground_truth.instances) {
      jv["annotations"].push_back({{"start", g.segment.start()}, {"end", g.segment.end()}, {"class_id", g.class_id}});
    }
    json rows = json::array();
    for (std::size_t t = 0; t < v.features.rows(); ++t) {
      json row = json::array();
      for (std::size_t d = 0; d < v.features.cols(); ++d) row.push_back(v.features(t, d));
      rows.push_back(std::move(row));
    }
    jv["features"] = std::move(rows);
    doc["videos"].push_back(std::move(jv));
  }
  os << doc.dump() << "\n";
}

Dataset read_dataset(std::istream& is) {
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::exception& e) {
    throw IoError(std::string("dataset is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("format", "") != "salad-dataset") throw IoError("not a salad dataset document");
  const auto& ver = field(doc, "version", "dataset");
  if (!ver.is_number_integer() || ver.get<int>() != kDatasetVersion) {
    throw IoError("unsupported dataset version " + ver.dump() + " (expected " + std::to_string(kDatasetVersion) + ")");
  }
  Dataset ds;
  try {
    ds.feature_dim = field(doc, "feature_dim", "dataset").get<std::size_t>();
    ds.num_classes = field(doc, "num_classes", "dataset").get<std::size_t>();
    ds.class_names = field(doc, "class_names", "dataset").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed dataset header: ") + e.what());
  }
  const auto& videos = field(doc, "videos", "dataset");
  if (!videos.is_array()) throw IoError("dataset: 'videos' must be an array");

  for (std::size_t vi = 0; vi < videos.size(); ++vi) {
    const auto& jv = videos[vi];
    const std::string where = "video #" + std::to_string(vi);
    VideoSample v;
    const auto& id = field(jv, "id", where);
    if (!id.is_string()) throw IoError(where + ": id must be a string");
    v.video_id = id.get<std::string>();
    const std::string vwhere = "video '" + v.video_id + "'";
    v.frame_rate = finite_number(field(jv, "frame_rate", vwhere), vwhere + " frame_rate");
    if (!(v.frame_rate > 0.0)) throw IoError(vwhere + ": frame_rate must be positive");

    const auto& rows = field(jv, "features", vwhere);
    if (!rows.is_array() || rows.empty()) throw IoError(vwhere + ": features must be a non-empty array of rows");
    v.features = ad::Tensor::matrix(rows.size(), ds.feature_dim);
    for (std::size_t t = 0; t < rows.size(); ++t) {
      if (!rows[t].is_array() || rows[t].size() != ds.feature_dim) {
        throw IoError(vwhere + ": feature row " + std::to_string(t) + " does not have " +
                      std::to_string(ds.feature_dim) + " values");
      }
      for (std::size_t d = 0; d < ds.feature_dim; ++d) {
        v.features(t, d) = finite_number(rows[t][d], vwhere + " feature[" + std::to_string(t) + "]");
      }
    }
    v.ground_truth.video_length = v.duration();

    const auto& anns = field(jv, "annotations", vwhere);
    if (!anns.is_array()) throw IoError(vwhere + ": annotations must be an array");
    for (std::size_t k = 0; k < anns.size(); ++k) {
      const std::string awhere = vwhere + " instance " + std::to_string(k);
      const double s = finite_number(field(anns[k], "start", awhere), awhere + " start");
      const double e = finite_number(field(anns[k], "end", awhere), awhere + " end");
      const auto& cj = field(anns[k], "class_id", awhere);
      if (!cj.is_number_integer()) throw IoError(awhere + ": class_id must be an integer");
      const int c = cj.get<int>();
      if (!(e > s)) throw IoError(awhere + ": end must be greater than start");
      if (s < 0.0 || e > v.ground_truth.video_length) throw IoError(awhere + ": lies outside the video");
      if (c < 1 || static_cast<std::size_t>(c) > ds.num_classes) throw IoError(awhere + ": class_id out of range");
      v.ground_truth.instances.push_back({Interval(s, e), c});
    }
    ds.videos.push_back(std::move(v));
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_dataset(os, ds);
  if (!os) throw IoError("failed writing " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return read_dataset(is);
}

void write_proposals(std::ostream& os, const VideoDetections& dets) {
  os << "video_id,start,end,score,class_id\n";
  for (const auto& [vid, props] : dets) {
    if (vid.find_first_of(",\n") != std::string::npos) throw IoError("video id '" + vid + "' contains a separator");
    for (const auto& p : props) {
      os << vid << "," << to_text(p.interval.start()) << "," << to_text(p.interval.end()) << "," << to_text(p.score)
         << "," << p.class_id << "\n";
    }
  }
}

VideoDetections read_proposals(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) return {};
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "video_id,start,end,score,class_id") throw IoError("proposal file has an unexpected header: " + line);
  VideoDetections out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    if (cols.size() != 5) throw IoError("proposal line " + std::to_string(lineno) + ": expected 5 columns");
    try {
      std::size_t used = 0;
      auto num = [&](const std::string& s) {
        const double v = std::stod(s, &used);
        if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
        return v;
      };
      Proposal p;
      p.interval = Interval(num(cols[1]), num(cols[2]));
      p.score = num(cols[3]);
      p.class_id = std::stoi(cols[4], &used);
      if (used != cols[4].size()) throw std::invalid_argument(cols[4]);
      auto& bucket = out[cols[0]];
      p.source_frame = bucket.size();
      bucket.push_back(p);
    } catch (const std::exception& e) {
      throw IoError("proposal line " + std::to_string(lineno) + ": malformed record (" + e.what() + ")");
    }
  }
  return out;
}

void save_proposals(const VideoDetections& dets, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_proposals(os, dets);
}

VideoDetections load_proposals(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  return read_proposals(is);
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) throw InvalidArgument("train fraction must lie in [0, 1]");
  const auto n_train = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(ds.videos.size())));
  Dataset train = ds;
  Dataset val = ds;
  train.videos.assign(ds.videos.begin(), ds.videos.begin() + static_cast<std::ptrdiff_t>(n_train));
  val.videos.assign(ds.videos.begin() + static_cast<std::ptrdiff_t>(n_train), ds.videos.end());
  return {std::move(train), std::move(val)};
}

}  // namespace salad
