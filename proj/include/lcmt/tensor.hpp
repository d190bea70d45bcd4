#pragma once
// Dense row-major tensor of doubles: the value type shared by every module.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lcmt {

class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    values_.assign(checked_count(shape_), 0.0);
  }

  Tensor(std::vector<int> shape, std::vector<double> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != checked_count(shape_))
      throw std::invalid_argument("tensor: value count does not match shape");
  }

  static Tensor scalar(double v) { return Tensor({}, {v}); }
  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int> shape, double v) {
    Tensor t(std::move(shape));
    std::fill(t.values_.begin(), t.values_.end(), v);
    return t;
  }

  static Tensor identity(int n) {
    Tensor t({n, n});
    for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
  }

  int rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }

  int rows() const {
    require_rank(2);
    return shape_[0];
  }
  int cols() const {
    require_rank(2);
    return shape_[1];
  }

  std::size_t size() const { return values_.size(); }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  double at(int i, int j) const {
    require_rank(2);
    return values_[static_cast<std::size_t>(i) * shape_[1] + j];
  }
  double& at(int i, int j) {
    require_rank(2);
    return values_[static_cast<std::size_t>(i) * shape_[1] + j];
  }

  // Value of a one-element tensor (rank 0 or any all-ones shape).
  double item() const {
    if (values_.size() != 1) throw std::invalid_argument("tensor: item() on non-scalar");
    return values_[0];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (double v : values_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool operator==(const Tensor& o) const { return shape_ == o.shape_ && values_ == o.values_; }
  bool operator!=(const Tensor& o) const { return !(*this == o); }

 private:
  static std::size_t checked_count(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int e : shape) {
      if (e <= 0) throw std::invalid_argument("tensor: extents must be positive");
      n *= static_cast<std::size_t>(e);
    }
    return n;
  }

  void require_rank(int r) const {
    if (rank() != r)
      throw std::invalid_argument("tensor: expected rank " + std::to_string(r) + ", got rank " +
                                  std::to_string(rank()));
  }

  std::vector<int> shape_;
  std::vector<double> values_;
};

// Stack two matrices with equal column counts, a on top of b.
inline Tensor vstack(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols())
    throw std::invalid_argument("vstack: operands must be matrices with equal column counts");
  Tensor out({a.rows() + b.rows(), a.cols()});
  std::copy(a.data(), a.data() + a.size(), out.data());
  std::copy(b.data(), b.data() + b.size(), out.data() + a.size());
  return out;
}

}  // namespace lcmt
