#pragma once
// Binary checkpoints, the metrics CSV, and the latent-feature export.
//
// Checkpoint layout (all integers little-endian):
//   bytes 0..7   magic "LCMTCKPT"
//   u32          format version (currently 1)
//   u32          record count
//   per record:  u32 name length, name bytes,
//                u32 rank, u64 extent per dimension,
//                f64 per value (row-major)
//   u32          RNG blob length, opaque bytes
//   u32          config echo length, config text
// The step counter and epoch ride as the first two records ("meta.step",
// "meta.epoch", rank-0), so alternate readers only need the record loop.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lcmt/config.hpp"
#include "lcmt/strings.hpp"
#include "lcmt/tensor.hpp"

namespace lcmt {

inline constexpr char kCheckpointMagic[8] = {'L', 'C', 'M', 'T', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::uint64_t step = 0;
  std::int64_t epoch = -1;  // last completed epoch
  std::vector<std::pair<std::string, Tensor>> tensors;
  std::string rng_state;    // opaque; produced and consumed by the trainer
  std::string config_text;  // canonical config echo

  const Tensor* find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return &t;
    return nullptr;
  }
};

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

inline void put_f64(std::ostream& os, double d) { put_u64(os, std::bit_cast<std::uint64_t>(d)); }

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("checkpoint: truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("checkpoint: truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

inline std::string get_blob(std::istream& is) {
  const std::uint32_t len = get_u32(is);
  std::string out(len, '\0');
  if (len != 0 && !is.read(out.data(), len)) throw std::runtime_error("checkpoint: truncated");
  return out;
}

inline void put_record(std::ostream& os, const std::string& name, const Tensor& t) {
  put_u32(os, static_cast<std::uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  put_u32(os, static_cast<std::uint32_t>(t.rank()));
  for (int i = 0; i < t.rank(); ++i) put_u64(os, static_cast<std::uint64_t>(t.dim(i)));
  for (double v : t.values()) put_f64(os, v);
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& c) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  os.write(kCheckpointMagic, 8);
  detail::put_u32(os, c.version);
  detail::put_u32(os, static_cast<std::uint32_t>(c.tensors.size() + 2));
  detail::put_record(os, "meta.step", Tensor::scalar(static_cast<double>(c.step)));
  detail::put_record(os, "meta.epoch", Tensor::scalar(static_cast<double>(c.epoch)));
  for (const auto& [name, t] : c.tensors) detail::put_record(os, name, t);
  detail::put_u32(os, static_cast<std::uint32_t>(c.rng_state.size()));
  os.write(c.rng_state.data(), static_cast<std::streamsize>(c.rng_state.size()));
  detail::put_u32(os, static_cast<std::uint32_t>(c.config_text.size()));
  os.write(c.config_text.data(), static_cast<std::streamsize>(c.config_text.size()));
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[8];
  if (!is.read(magic, 8)) throw std::runtime_error("checkpoint: truncated");
  if (std::memcmp(magic, kCheckpointMagic, 8) != 0) throw std::runtime_error("checkpoint: bad magic");
  Checkpoint c;
  c.version = detail::get_u32(is);
  if (c.version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(c.version));
  const std::uint32_t count = detail::get_u32(is);
  for (std::uint32_t r = 0; r < count; ++r) {
    const std::uint32_t name_len = detail::get_u32(is);
    std::string name(name_len, '\0');
    if (name_len != 0 && !is.read(name.data(), name_len)) throw std::runtime_error("checkpoint: truncated");
    const std::uint32_t rank = detail::get_u32(is);
    std::vector<int> shape;
    std::size_t n = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const std::uint64_t e = detail::get_u64(is);
      if (e == 0 || e > static_cast<std::uint64_t>(INT32_MAX)) throw std::runtime_error("checkpoint: bad extent");
      shape.push_back(static_cast<int>(e));
      n *= static_cast<std::size_t>(e);
    }
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = detail::get_f64(is);
    if (name == "meta.step")
      c.step = static_cast<std::uint64_t>(values.at(0));
    else if (name == "meta.epoch")
      c.epoch = static_cast<std::int64_t>(values.at(0));
    else
      c.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  c.rng_state = detail::get_blob(is);
  c.config_text = detail::get_blob(is);
  return c;
}

// --- metrics CSV -------------------------------------------------------

inline constexpr const char* kMetricsHeader =
    "epoch,student_error,teacher_error,ce,cons,lc,lambda1,lambda2,lr,feature_variance,collapse";

inline void append_metrics(const std::string& path, const EpochMetrics& m) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream os(path, std::ios::app);
  if (!os) throw std::runtime_error("metrics: cannot open " + path + " for writing");
  if (fresh) os << kMetricsHeader << '\n';
  os << m.epoch << ',' << fmt_double(m.student_error) << ',' << fmt_double(m.teacher_error) << ','
     << fmt_double(m.ce) << ',' << fmt_double(m.cons) << ',' << fmt_double(m.lc) << ',' << fmt_double(m.lambda1)
     << ',' << fmt_double(m.lambda2) << ',' << fmt_double(m.lr) << ',' << fmt_double(m.feature_variance) << ','
     << (m.collapse_flag ? 1 : 0) << '\n';
  if (!os) throw std::runtime_error("metrics: write failed for " + path);
}

inline std::vector<EpochMetrics> read_metrics(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("metrics: cannot open " + path);
  std::string line;
  if (!std::getline(is, line) || trim(line) != kMetricsHeader)
    throw std::runtime_error("metrics: bad header in " + path);
  std::vector<EpochMetrics> out;
  while (std::getline(is, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto cells = split(t, ',');
    if (cells.size() != 11) throw std::runtime_error("metrics: bad row in " + path);
    EpochMetrics m;
    long long epoch = 0, flag = 0;
    double vals[9] = {};
    bool ok = parse_ll_strict(cells[0], epoch) && parse_ll_strict(cells[10], flag);
    for (int i = 0; i < 9; ++i) ok = ok && parse_double_strict(cells[static_cast<std::size_t>(i + 1)], vals[i]);
    if (!ok) throw std::runtime_error("metrics: bad row in " + path);
    m.epoch = static_cast<int>(epoch);
    m.student_error = vals[0];
    m.teacher_error = vals[1];
    m.ce = vals[2];
    m.cons = vals[3];
    m.lc = vals[4];
    m.lambda1 = vals[5];
    m.lambda2 = vals[6];
    m.lr = vals[7];
    m.feature_variance = vals[8];
    m.collapse_flag = flag != 0;
    out.push_back(m);
  }
  return out;
}

// --- latent feature export ---------------------------------------------

struct FeatureDump {
  Tensor z;                           // [N x latent_dim]
  std::vector<int> label;             // ground truth
  std::vector<std::uint8_t> labeled;  // split membership
  std::vector<int> predicted;         // student predictions
};

inline void export_features(const std::string& path, const FeatureDump& f) {
  if (f.z.rank() != 2) throw std::invalid_argument("features: z must be [N x d]");
  const std::size_t n = static_cast<std::size_t>(f.z.rows());
  if (f.label.size() != n || f.labeled.size() != n || f.predicted.size() != n)
    throw std::invalid_argument("features: column lengths must match row count");
  std::ofstream os(path);
  if (!os) throw std::runtime_error("features: cannot open " + path + " for writing");
  for (int j = 0; j < f.z.cols(); ++j) os << 'z' << j << ',';
  os << "label,labeled,predicted\n";
  for (int i = 0; i < f.z.rows(); ++i) {
    for (int j = 0; j < f.z.cols(); ++j) os << fmt_double(f.z.at(i, j)) << ',';
    os << f.label[static_cast<std::size_t>(i)] << ',' << (f.labeled[static_cast<std::size_t>(i)] ? 1 : 0) << ','
       << f.predicted[static_cast<std::size_t>(i)] << '\n';
  }
  if (!os) throw std::runtime_error("features: write failed for " + path);
}

// Distinct run directory per (config, seed): base/<config-hash>-s<seed>.
inline std::string default_run_dir(const std::string& base, const TrainConfig& cfg) {
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(config_hash(cfg)));
  return base + "/" + std::string(hex).substr(0, 8) + "-s" + std::to_string(cfg.seed);
}

}  // namespace lcmt
