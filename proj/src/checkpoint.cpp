// Copyright (C) 2026 The salad authors
// SPDX-License-Identifier: Apache-2.0

#include "salad/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "salad/error.hpp"

namespace salad {

namespace {

constexpr char kMagic[] = "SALADCKPT";
constexpr std::size_t kMagicLen = sizeof(kMagic) - 1;
constexpr std::uint32_t kFloat32 = 1;
constexpr std::uint32_t kFloat64 = 2;

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

class Writer {
 public:
  template <typename T>
  void pod(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const char*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }
  void str(const std::string& s) {
    pod<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void tensors(const ParamSet& set) {
    pod<std::uint32_t>(static_cast<std::uint32_t>(set.size()));
    for (std::size_t i = 0; i < set.size(); ++i) {
      str(set.name(i));
      pod<std::uint32_t>(kFloat64);
      pod<std::uint32_t>(static_cast<std::uint32_t>(set[i].rank()));
      for (auto d : set[i].shape()) pod<std::uint64_t>(d);
      bytes(set[i].data().data(), set[i].size() * sizeof(double));
    }
  }
  const std::vector<char>& buffer() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  Reader(const char* data, std::size_t size, std::string where) : p_(data), end_(data + size), where_(std::move(where)) {}

  template <typename T>
  T pod() {
    T v;
    need(sizeof(T));
    std::memcpy(&v, p_, sizeof(T));
    p_ += sizeof(T);
    return v;
  }
  void bytes(void* out, std::size_t n) {
    need(n);
    std::memcpy(out, p_, n);
    p_ += n;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    need(n);
    std::string s(p_, n);
    p_ += n;
    return s;
  }
  ParamSet tensors() {
    ParamSet set;
    const auto count = pod<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
      auto name = str();
      const auto dtype = pod<std::uint32_t>();
      const auto rank = pod<std::uint32_t>();
      if (rank > 8) fail("tensor " + name + " has implausible rank");
      std::vector<std::size_t> shape(rank);
      for (auto& d : shape) d = static_cast<std::size_t>(pod<std::uint64_t>());
      ad::Tensor t(shape);
      if (dtype == kFloat64) {
        bytes(t.data().data(), t.size() * sizeof(double));
      } else if (dtype == kFloat32) {
        for (double& v : t.data()) v = static_cast<double>(pod<float>());
      } else {
        fail("tensor " + name + " has unknown dtype " + std::to_string(dtype));
      }
      set.add(std::move(name), std::move(t));
    }
    return set;
  }
  bool done() const { return p_ == end_; }
  [[noreturn]] void fail(const std::string& msg) const { throw IoError("checkpoint " + where_ + ": " + msg); }

 private:
  void need(std::size_t n) const {
    if (static_cast<std::size_t>(end_ - p_) < n) fail("truncated data");
  }
  const char* p_;
  const char* end_;
  std::string where_;
};

void model_section(Writer& w, const ModelConfig& m) {
  for (auto v : {m.feature_dim, m.hidden_dim, m.num_classes, m.head_width1, m.head_width2}) w.pod<std::uint64_t>(v);
  w.pod<std::uint64_t>(m.seed);
}

ModelConfig read_model_section(Reader& r) {
  ModelConfig m;
  m.feature_dim = r.pod<std::uint64_t>();
  m.hidden_dim = r.pod<std::uint64_t>();
  m.num_classes = r.pod<std::uint64_t>();
  m.head_width1 = r.pod<std::uint64_t>();
  m.head_width2 = r.pod<std::uint64_t>();
  m.seed = r.pod<std::uint64_t>();
  return m;
}

}  // namespace

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt) {
  std::vector<std::pair<std::string, Writer>> sections;
  auto section = [&](const char* name) -> Writer& { return sections.emplace_back(name, Writer{}).second; };

  model_section(section("model"), ckpt.model);
  {
    auto& w = section("config");
    w.bytes(ckpt.run_config.data(), ckpt.run_config.size());
  }
  {
    auto& w = section("counters");
    w.pod<std::uint64_t>(ckpt.step);
    w.pod<std::uint64_t>(ckpt.epoch);
  }
  section("params").tensors(ckpt.params);
  if (ckpt.optimizer) {
    section("adam.m").tensors(ckpt.optimizer->m);
    section("adam.v").tensors(ckpt.optimizer->v);
    auto& w = section("adam.steps");
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(ckpt.optimizer->steps.size()));
    for (auto s : ckpt.optimizer->steps) w.pod<std::uint64_t>(s);
  }
  if (!ckpt.frozen_alpha.empty()) {
    auto& w = section("frozen_alpha");
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(ckpt.frozen_alpha.size()));
    for (const auto& [vid, m] : ckpt.frozen_alpha) {
      w.str(vid);
      w.pod<std::uint64_t>(m.rows());
      w.pod<std::uint64_t>(m.cols());
      w.bytes(m.data().data(), m.data().size());
    }
  }

  Writer out;
  out.bytes(kMagic, kMagicLen);
  out.pod<std::uint32_t>(kCheckpointVersion);
  out.pod<std::uint32_t>(static_cast<std::uint32_t>(sections.size()));
  for (const auto& [name, w] : sections) {
    out.str(name);
    out.pod<std::uint64_t>(w.buffer().size());
    out.bytes(w.buffer().data(), w.buffer().size());
  }
  os.write(out.buffer().data(), static_cast<std::streamsize>(out.buffer().size()));
}

Checkpoint read_checkpoint(std::istream& is) {
  std::vector<char> data((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  Reader r(data.data(), data.size(), "stream");
  char magic[kMagicLen];
  r.bytes(magic, kMagicLen);
  if (std::memcmp(magic, kMagic, kMagicLen) != 0) r.fail("bad magic bytes");
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion) {
    r.fail("unsupported format version " + std::to_string(version) + " (expected " +
           std::to_string(kCheckpointVersion) + ")");
  }
  const auto count = r.pod<std::uint32_t>();

  Checkpoint ckpt;
  bool have_model = false;
  bool have_params = false;
  std::optional<ParamSet> m;
  std::optional<ParamSet> v;
  std::optional<std::vector<std::uint64_t>> steps;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name = r.str();
    const auto len = r.pod<std::uint64_t>();
    std::vector<char> payload(len);
    r.bytes(payload.data(), len);
    Reader s(payload.data(), payload.size(), "section " + name);
    if (name == "model") {
      ckpt.model = read_model_section(s);
      have_model = true;
    } else if (name == "config") {
      ckpt.run_config.assign(payload.begin(), payload.end());
      continue;
    } else if (name == "counters") {
      ckpt.step = s.pod<std::uint64_t>();
      ckpt.epoch = s.pod<std::uint64_t>();
    } else if (name == "params") {
      ckpt.params = s.tensors();
      have_params = true;
    } else if (name == "adam.m") {
      m = s.tensors();
    } else if (name == "adam.v") {
      v = s.tensors();
    } else if (name == "adam.steps") {
      steps.emplace(s.pod<std::uint32_t>());
      for (auto& x : *steps) x = s.pod<std::uint64_t>();
    } else if (name == "frozen_alpha") {
      const auto n = s.pod<std::uint32_t>();
      for (std::uint32_t k = 0; k < n; ++k) {
        auto vid = s.str();
        const auto rows = s.pod<std::uint64_t>();
        const auto cols = s.pod<std::uint64_t>();
        BinaryMatrix mat(rows, cols);
        for (std::uint64_t a = 0; a < rows; ++a) {
          for (std::uint64_t b = 0; b < cols; ++b) mat.set(a, b, s.pod<std::uint8_t>() != 0);
        }
        ckpt.frozen_alpha.emplace(std::move(vid), std::move(mat));
      }
    } else {
      continue;  // unknown sections are skipped
    }
    if (!s.done()) s.fail("trailing bytes");
  }
  if (!r.done()) r.fail("trailing bytes after last section");
  if (!have_model || !have_params) r.fail("missing model or params section");
  if (m || v || steps) {
    if (!(m && v && steps)) r.fail("incomplete optimizer state");
    ckpt.optimizer = AdamState{std::move(*m), std::move(*v), std::move(*steps)};
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_checkpoint(os, ckpt);
  if (!os) throw IoError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  try {
    return read_checkpoint(is);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

namespace {

std::string shape_str(const std::vector<std::size_t>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

void check_layout(const ParamSet& stored, const ParamSet& reference, const std::string& what) {
  std::vector<std::string> problems;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const auto& name = reference.name(i);
    if (!stored.contains(name)) {
      problems.push_back("missing " + name);
    } else if (!stored.at(name).same_shape(reference[i])) {
      problems.push_back(name + " has shape " + shape_str(stored.at(name).shape()) + ", expected " +
                         shape_str(reference[i].shape()));
    }
  }
  for (std::size_t i = 0; i < stored.size(); ++i) {
    if (!reference.contains(stored.name(i))) problems.push_back("unexpected " + stored.name(i));
  }
  if (!problems.empty()) {
    std::string msg = what + " does not match the model configuration:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw InvalidArgument(msg);
  }
}

ParamSet reorder(const ParamSet& stored, const ParamSet& reference) {
  ParamSet out;
  for (std::size_t i = 0; i < reference.size(); ++i) out.add(reference.name(i), stored.at(reference.name(i)));
  return out;
}

}  // namespace

ParamSet restore_params(const Checkpoint& ckpt, const ModelConfig& expected) {
  auto layout = expected;
  const auto reference = init_params(layout);
  check_layout(ckpt.params, reference, "checkpoint parameters");
  return reorder(ckpt.params, reference);
}

AdamState restore_optimizer(const Checkpoint& ckpt, const ParamSet& params, bool reset) {
  if (reset) return AdamState::zeros_like(params);
  if (!ckpt.optimizer) throw InvalidArgument("checkpoint has no optimizer state (use --reset-optimizer)");
  const auto& opt = *ckpt.optimizer;
  check_layout(opt.m, params, "optimizer first moments");
  check_layout(opt.v, params, "optimizer second moments");
  if (opt.steps.size() != params.size()) throw InvalidArgument("optimizer step counters do not match parameters");
  std::vector<std::uint64_t> steps(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) steps[i] = opt.steps[ckpt.optimizer->m.index_of(params.name(i))];
  return {reorder(opt.m, params), reorder(opt.v, params), std::move(steps)};
}

}  // namespace salad
