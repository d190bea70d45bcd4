#pragma once
// Synthetic datasets, CSV ingestion, the stratified labeled/unlabeled split,
// batch sampling, and input perturbation.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lcmt/rng.hpp"
#include "lcmt/strings.hpp"
#include "lcmt/tensor.hpp"

namespace lcmt {

struct Dataset {
  Tensor X;                              // [N x d]
  std::vector<int> y;                    // ground truth for every row
  std::vector<std::uint8_t> labeled_mask;  // 1 = label visible to training
  int class_count = 0;

  int size() const { return X.rank() == 2 ? X.rows() : 0; }
  int feature_dim() const { return X.rank() == 2 ? X.cols() : 0; }

  int n_labeled() const {
    int n = 0;
    for (auto m : labeled_mask) n += m ? 1 : 0;
    return n;
  }
  int n_unlabeled() const { return size() - n_labeled(); }

  std::vector<int> labeled_indices() const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i)
      if (labeled_mask[static_cast<std::size_t>(i)]) out.push_back(i);
    return out;
  }
  std::vector<int> unlabeled_indices() const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i)
      if (!labeled_mask[static_cast<std::size_t>(i)]) out.push_back(i);
    return out;
  }

  void validate() const {
    if (X.rank() != 2) throw std::invalid_argument("dataset: X must be [N x d]");
    if (static_cast<int>(y.size()) != size() || static_cast<int>(labeled_mask.size()) != size())
      throw std::invalid_argument("dataset: y/mask length must equal row count");
    if (class_count < 2) throw std::invalid_argument("dataset: need at least 2 classes");
    for (int v : y)
      if (v < 0 || v >= class_count) throw std::invalid_argument("dataset: label out of range");
  }
};

namespace detail {
// n rows split as evenly as possible over k classes; earlier classes take the
// remainder. Returns per-class counts.
inline std::vector<int> balanced_counts(int n, int k) {
  std::vector<int> counts(static_cast<std::size_t>(k), n / k);
  for (int c = 0; c < n % k; ++c) counts[static_cast<std::size_t>(c)] += 1;
  return counts;
}
}  // namespace detail

// Two interleaved half-circle arcs with optional Gaussian jitter: class 0 on
// the unit circle around the origin (upper arc), class 1 on the unit circle
// around (1, 0.5) (lower arc).
inline Dataset gen_two_moons(int n, double noise_sigma, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("two_moons: need n >= 2");
  if (noise_sigma < 0.0) throw std::invalid_argument("two_moons: noise must be >= 0");
  Rng rng(seed);
  Dataset ds;
  ds.class_count = 2;
  ds.X = Tensor({n, 2});
  ds.y.resize(static_cast<std::size_t>(n));
  ds.labeled_mask.assign(static_cast<std::size_t>(n), 1);
  const auto counts = detail::balanced_counts(n, 2);
  int row = 0;
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < counts[static_cast<std::size_t>(c)]; ++i, ++row) {
      const double t = rng.uniform(0.0, 3.141592653589793238462643383279502884);
      double x = std::cos(t), y = std::sin(t);
      if (c == 1) {
        x = 1.0 - x;
        y = 0.5 - y;
      }
      if (noise_sigma > 0.0) {
        x += rng.normal(0.0, noise_sigma);
        y += rng.normal(0.0, noise_sigma);
      }
      ds.X.at(row, 0) = x;
      ds.X.at(row, 1) = y;
      ds.y[static_cast<std::size_t>(row)] = c;
    }
  }
  return ds;
}

// Isotropic Gaussian clusters, one class per center.
inline Dataset gen_blobs(int n, const std::vector<std::vector<double>>& centers, double sigma, std::uint64_t seed) {
  const int k = static_cast<int>(centers.size());
  if (k < 2) throw std::invalid_argument("blobs: need at least 2 centers");
  if (n < k) throw std::invalid_argument("blobs: need n >= center count");
  if (sigma < 0.0) throw std::invalid_argument("blobs: sigma must be >= 0");
  const int d = static_cast<int>(centers[0].size());
  for (const auto& c : centers)
    if (static_cast<int>(c.size()) != d) throw std::invalid_argument("blobs: centers must share one dimension");
  Rng rng(seed);
  Dataset ds;
  ds.class_count = k;
  ds.X = Tensor({n, d});
  ds.y.resize(static_cast<std::size_t>(n));
  ds.labeled_mask.assign(static_cast<std::size_t>(n), 1);
  const auto counts = detail::balanced_counts(n, k);
  int row = 0;
  for (int c = 0; c < k; ++c)
    for (int i = 0; i < counts[static_cast<std::size_t>(c)]; ++i, ++row) {
      for (int j = 0; j < d; ++j)
        ds.X.at(row, j) = centers[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)] +
                          (sigma > 0.0 ? rng.normal(0.0, sigma) : 0.0);
      ds.y[static_cast<std::size_t>(row)] = c;
    }
  return ds;
}

// k centers evenly spaced on a circle of the given radius.
inline std::vector<std::vector<double>> ring_centers(int k, double radius) {
  if (k < 2) throw std::invalid_argument("ring_centers: need k >= 2");
  if (radius <= 0.0) throw std::invalid_argument("ring_centers: radius must be > 0");
  std::vector<std::vector<double>> out;
  const double pi = 3.141592653589793238462643383279502884;
  for (int i = 0; i < k; ++i) {
    const double a = 2.0 * pi * i / k;
    out.push_back({radius * std::cos(a), radius * std::sin(a)});
  }
  return out;
}

// Two concentric circles: class 0 at radius 1, class 1 at radius inner_factor.
inline Dataset gen_circles(int n, double noise_sigma, std::uint64_t seed, double inner_factor = 0.5) {
  if (n < 2) throw std::invalid_argument("circles: need n >= 2");
  if (noise_sigma < 0.0) throw std::invalid_argument("circles: noise must be >= 0");
  if (inner_factor <= 0.0 || inner_factor >= 1.0) throw std::invalid_argument("circles: factor must lie in (0, 1)");
  Rng rng(seed);
  Dataset ds;
  ds.class_count = 2;
  ds.X = Tensor({n, 2});
  ds.y.resize(static_cast<std::size_t>(n));
  ds.labeled_mask.assign(static_cast<std::size_t>(n), 1);
  const auto counts = detail::balanced_counts(n, 2);
  const double pi = 3.141592653589793238462643383279502884;
  int row = 0;
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < counts[static_cast<std::size_t>(c)]; ++i, ++row) {
      const double t = rng.uniform(0.0, 2.0 * pi);
      const double r = c == 0 ? 1.0 : inner_factor;
      double x = r * std::cos(t), y = r * std::sin(t);
      if (noise_sigma > 0.0) {
        x += rng.normal(0.0, noise_sigma);
        y += rng.normal(0.0, noise_sigma);
      }
      ds.X.at(row, 0) = x;
      ds.X.at(row, 1) = y;
      ds.y[static_cast<std::size_t>(row)] = c;
    }
  return ds;
}

// Keep n_labeled labels visible, distributed over classes as evenly as
// possible (stratified); all other rows keep their label for evaluation only.
inline Dataset split_labeled(const Dataset& ds, int n_labeled, std::uint64_t seed) {
  ds.validate();
  if (n_labeled < ds.class_count)
    throw std::invalid_argument("split: n_labeled must be >= class count so every class keeps a label");
  if (n_labeled > ds.size()) throw std::invalid_argument("split: n_labeled exceeds dataset size");
  Dataset out = ds;
  out.labeled_mask.assign(static_cast<std::size_t>(ds.size()), 0);
  Rng rng(seed);
  const auto quotas = detail::balanced_counts(n_labeled, ds.class_count);
  for (int c = 0; c < ds.class_count; ++c) {
    std::vector<int> rows;
    for (int i = 0; i < ds.size(); ++i)
      if (ds.y[static_cast<std::size_t>(i)] == c) rows.push_back(i);
    const int quota = quotas[static_cast<std::size_t>(c)];
    if (static_cast<int>(rows.size()) < quota)
      throw std::invalid_argument("split: class " + std::to_string(c) + " has fewer rows than its labeled quota");
    rng.shuffle(rows);
    for (int i = 0; i < quota; ++i) out.labeled_mask[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)])] = 1;
  }
  return out;
}

struct PerturbSpec {
  double gaussian_sigma = 0.0;
  double jitter = 0.0;  // uniform in [-jitter, jitter]

  void validate() const {
    if (gaussian_sigma < 0.0 || jitter < 0.0) throw std::invalid_argument("perturb: magnitudes must be >= 0");
  }
};

// Independent additive noise per entry; zero magnitudes return X unchanged.
inline Tensor perturb(const Tensor& x, const PerturbSpec& spec, Rng& rng) {
  spec.validate();
  Tensor out = x;
  if (spec.gaussian_sigma > 0.0)
    for (double& v : out.values()) v += rng.normal(0.0, spec.gaussian_sigma);
  if (spec.jitter > 0.0)
    for (double& v : out.values()) v += rng.uniform(-spec.jitter, spec.jitter);
  return out;
}

struct BatchSpec {
  int b_labeled = 1;
  int b_unlabeled = 1;

  void validate() const {
    if (b_labeled < 1 || b_unlabeled < 1) throw std::invalid_argument("batch: sizes must be >= 1");
  }
};

struct Batch {
  Tensor x_labeled;         // [b_l x d]
  std::vector<int> labels;  // targets for x_labeled rows only
  Tensor x_unlabeled;       // [b_u x d]
};

// Draws labeled and unlabeled index sets without replacement from independent
// permutation streams; a stream reshuffles when a full batch no longer fits.
class BatchSampler {
 public:
  BatchSampler(const Dataset& ds, BatchSpec spec, std::uint64_t seed)
      : pool_l_(ds.labeled_indices()), pool_u_(ds.unlabeled_indices()), spec_(spec), rng_(seed) {
    spec_.validate();
    if (static_cast<int>(pool_l_.size()) < spec_.b_labeled)
      throw std::invalid_argument("sampler: labeled batch larger than the labeled partition");
    if (static_cast<int>(pool_u_.size()) < spec_.b_unlabeled)
      throw std::invalid_argument("sampler: unlabeled batch larger than the unlabeled partition");
  }

  std::pair<std::vector<int>, std::vector<int>> next_indices() {
    return {draw(pool_l_, perm_l_, cur_l_, spec_.b_labeled), draw(pool_u_, perm_u_, cur_u_, spec_.b_unlabeled)};
  }

  std::string save() const {
    std::ostringstream os;
    const auto put = [&os](const std::vector<int>& v, std::size_t cur) {
      os << v.size() << ' ';
      for (int x : v) os << x << ' ';
      os << cur << ' ';
    };
    put(perm_l_, cur_l_);
    put(perm_u_, cur_u_);
    os << rng_.save();
    return os.str();
  }

  void restore(const std::string& s) {
    std::istringstream is(s);
    const auto get = [&is](std::vector<int>& v, std::size_t& cur) {
      std::size_t n = 0;
      is >> n;
      v.assign(n, 0);
      for (auto& x : v) is >> x;
      is >> cur;
    };
    get(perm_l_, cur_l_);
    get(perm_u_, cur_u_);
    std::string rest;
    std::getline(is, rest);
    if (!is) throw std::runtime_error("sampler: bad saved state");
    rng_.restore(trim(rest));
  }

 private:
  std::vector<int> draw(const std::vector<int>& pool, std::vector<int>& perm, std::size_t& cur, int b) {
    if (cur + static_cast<std::size_t>(b) > perm.size()) {
      perm = pool;
      rng_.shuffle(perm);
      cur = 0;
    }
    std::vector<int> out(perm.begin() + static_cast<std::ptrdiff_t>(cur),
                         perm.begin() + static_cast<std::ptrdiff_t>(cur) + b);
    cur += static_cast<std::size_t>(b);
    return out;
  }

  std::vector<int> pool_l_, pool_u_;
  std::vector<int> perm_l_, perm_u_;
  std::size_t cur_l_ = 0, cur_u_ = 0;
  BatchSpec spec_;
  Rng rng_;
};

// Copies rows (and labels for the labeled side) out of the dataset. Unlabeled
// rows carry no labels past this point.
inline Batch assemble_batch(const Dataset& ds, const std::vector<int>& labeled_idx,
                            const std::vector<int>& unlabeled_idx) {
  const int d = ds.feature_dim();
  Batch b;
  b.x_labeled = Tensor({static_cast<int>(labeled_idx.size()), d});
  b.x_unlabeled = Tensor({static_cast<int>(unlabeled_idx.size()), d});
  for (std::size_t i = 0; i < labeled_idx.size(); ++i) {
    const int r = labeled_idx[i];
    if (!ds.labeled_mask[static_cast<std::size_t>(r)])
      throw std::invalid_argument("batch: labeled index points at an unlabeled row");
    for (int j = 0; j < d; ++j) b.x_labeled.at(static_cast<int>(i), j) = ds.X.at(r, j);
    b.labels.push_back(ds.y[static_cast<std::size_t>(r)]);
  }
  for (std::size_t i = 0; i < unlabeled_idx.size(); ++i) {
    const int r = unlabeled_idx[i];
    for (int j = 0; j < d; ++j) b.x_unlabeled.at(static_cast<int>(i), j) = ds.X.at(r, j);
  }
  return b;
}

// CSV layout: header "f0,...,f{d-1},label", one sample per row, label last.
inline void write_dataset_csv(const std::string& path, const Dataset& ds) {
  ds.validate();
  std::ofstream os(path);
  if (!os) throw std::runtime_error("csv: cannot open " + path + " for writing");
  for (int j = 0; j < ds.feature_dim(); ++j) os << 'f' << j << ',';
  os << "label\n";
  for (int i = 0; i < ds.size(); ++i) {
    for (int j = 0; j < ds.feature_dim(); ++j) os << fmt_double(ds.X.at(i, j)) << ',';
    os << ds.y[static_cast<std::size_t>(i)] << '\n';
  }
  if (!os) throw std::runtime_error("csv: write failed for " + path);
}

// Reads the layout written above. Every row arrives labeled; apply
// split_labeled afterwards for training. Errors cite the offending data row
// (1-based, not counting the header).
inline Dataset load_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("csv: cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("csv: " + path + " is empty");
  const auto header = split(trim(line), ',');
  const int d = static_cast<int>(header.size()) - 1;
  if (d < 1 || trim(header.back()) != "label")
    throw std::runtime_error("csv: header must be f0,...,f{d-1},label");
  for (int j = 0; j < d; ++j)
    if (trim(header[static_cast<std::size_t>(j)]) != "f" + std::to_string(j))
      throw std::runtime_error("csv: header must be f0,...,f{d-1},label");

  std::vector<double> values;
  std::vector<int> labels;
  int row = 0;
  while (std::getline(is, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    ++row;
    const auto cells = split(t, ',');
    if (static_cast<int>(cells.size()) != d + 1)
      throw std::runtime_error("csv: row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                               " cells, expected " + std::to_string(d + 1));
    for (int j = 0; j < d; ++j) {
      double v = 0.0;
      if (!parse_double_strict(trim(cells[static_cast<std::size_t>(j)]), v))
        throw std::runtime_error("csv: non-numeric cell at row " + std::to_string(row));
      values.push_back(v);
    }
    long long y = 0;
    if (!parse_ll_strict(trim(cells.back()), y) || y < 0)
      throw std::runtime_error("csv: bad label at row " + std::to_string(row));
    labels.push_back(static_cast<int>(y));
  }
  if (row == 0) throw std::runtime_error("csv: " + path + " has no data rows");

  Dataset ds;
  ds.X = Tensor({row, d}, std::move(values));
  ds.y = std::move(labels);
  ds.labeled_mask.assign(static_cast<std::size_t>(row), 1);
  int k = 0;
  for (int v : ds.y) k = std::max(k, v + 1);
  ds.class_count = std::max(k, 2);
  return ds;
}

}  // namespace lcmt
