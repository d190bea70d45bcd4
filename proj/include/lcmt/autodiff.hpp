#pragma once
// Reverse-mode autodiff over dense tensors: a tape of primitives in
// topological order, gradients keyed by node id, and a finite-difference
// harness used to validate every primitive.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "lcmt/tensor.hpp"

namespace lcmt {

namespace detail {

// out = a[m x k] . b[k x n]; acc accumulates instead of assigning.
inline void mm_nn(const double* a, const double* b, double* out, int m, int k, int n, bool acc) {
  if (!acc) std::fill(out, out + static_cast<std::size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i) {
    const double* ar = a + static_cast<std::size_t>(i) * k;
    double* outr = out + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = ar[p];
      const double* br = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) outr[j] += av * br[j];
    }
  }
}

// out = a[m x k] . b[n x k]^T  -> [m x n]
inline void mm_nt(const double* a, const double* b, double* out, int m, int k, int n, bool acc) {
  for (int i = 0; i < m; ++i) {
    const double* ar = a + static_cast<std::size_t>(i) * k;
    double* outr = out + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* br = b + static_cast<std::size_t>(j) * k;
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += ar[p] * br[p];
      if (acc)
        outr[j] += s;
      else
        outr[j] = s;
    }
  }
}

// out = a[k x m]^T . b[k x n]  -> [m x n]
inline void mm_tn(const double* a, const double* b, double* out, int m, int k, int n, bool acc) {
  if (!acc) std::fill(out, out + static_cast<std::size_t>(m) * n, 0.0);
  for (int p = 0; p < k; ++p) {
    const double* ar = a + static_cast<std::size_t>(p) * m;
    const double* br = b + static_cast<std::size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const double av = ar[i];
      double* outr = out + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) outr[j] += av * br[j];
    }
  }
}

}  // namespace detail

// Squared Euclidean distances between the rows of a[m x d] and b[n x d],
// computed by expansion (|a|^2 + |b|^2 - 2 a.b) and clamped at zero.
// force_zero_diag writes exact zeros on the diagonal, for self-comparisons
// where both arguments are the same collection of rows.
inline Tensor pairwise_sq_dist_values(const Tensor& a, const Tensor& b, bool force_zero_diag = false) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols())
    throw std::invalid_argument("pairwise_sq_dist: operands must be matrices with equal feature widths");
  const int m = a.rows(), n = b.rows(), d = a.cols();
  std::vector<double> na(static_cast<std::size_t>(m)), nb(static_cast<std::size_t>(n));
  for (int i = 0; i < m; ++i) {
    double s = 0.0;
    for (int k = 0; k < d; ++k) s += a.at(i, k) * a.at(i, k);
    na[static_cast<std::size_t>(i)] = s;
  }
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    for (int k = 0; k < d; ++k) s += b.at(j, k) * b.at(j, k);
    nb[static_cast<std::size_t>(j)] = s;
  }
  Tensor out({m, n});
  detail::mm_nt(a.data(), b.data(), out.data(), m, d, n, false);  // row dot products
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      const double v = na[static_cast<std::size_t>(i)] + nb[static_cast<std::size_t>(j)] - 2.0 * out.at(i, j);
      out.at(i, j) = v > 0.0 ? v : 0.0;
    }
  if (force_zero_diag)
    for (int i = 0; i < std::min(m, n); ++i) out.at(i, i) = 0.0;
  return out;
}

class Tape;

// Gradients of one backward pass, keyed by tape node id. Every trainable leaf
// at or below the loss gets an entry (zeros when no gradient flows to it).
class Gradients {
 public:
  const Tensor& at(int id) const {
    const auto it = grads_.find(id);
    if (it == grads_.end()) throw std::out_of_range("gradients: no entry for node " + std::to_string(id));
    return it->second;
  }
  bool contains(int id) const { return grads_.count(id) != 0; }
  std::size_t size() const { return grads_.size(); }

 private:
  friend class Tape;
  std::unordered_map<int, Tensor> grads_;
};

class Tape {
 public:
  using NodeId = int;

  // --- leaves ---------------------------------------------------------
  NodeId variable(Tensor v) { return push(Node{Op::Leaf, -1, -1, std::move(v), true}, "variable"); }
  NodeId constant(Tensor v) { return push(Node{Op::Leaf, -1, -1, std::move(v), false}, "constant"); }

  // Copies the value and blocks gradient flow through it.
  NodeId detach(NodeId a) {
    Node n{Op::Detach, a, -1, value(a), false};
    return push(std::move(n), "detach");
  }

  // --- elementwise ----------------------------------------------------
  NodeId add(NodeId a, NodeId b) { return binary_elementwise(Op::Add, a, b, "add"); }
  NodeId sub(NodeId a, NodeId b) { return binary_elementwise(Op::Sub, a, b, "sub"); }
  NodeId mul(NodeId a, NodeId b) { return binary_elementwise(Op::Mul, a, b, "mul"); }

  NodeId scale(NodeId a, double c) {
    if (!std::isfinite(c)) throw std::invalid_argument("scale: non-finite factor");
    Node n{Op::Scale, a, -1, value(a), grad_of(a)};
    n.scalar = c;
    for (double& v : n.value.values()) v *= c;
    return push(std::move(n), "scale");
  }

  NodeId relu(NodeId a) {
    Node n{Op::Relu, a, -1, value(a), grad_of(a)};
    for (double& v : n.value.values()) v = v > 0.0 ? v : 0.0;  // subgradient at 0 is 0
    return push(std::move(n), "relu");
  }

  // --- matrix ops -----------------------------------------------------
  NodeId add_row_bias(NodeId m, NodeId bias) {
    const Tensor& mv = value(m);
    const Tensor& bv = value(bias);
    if (mv.rank() != 2 || bv.rank() != 1 || bv.dim(0) != mv.cols())
      throw std::invalid_argument("add_row_bias: bias length must equal matrix columns");
    Node n{Op::AddRowBias, m, bias, mv, grad_of(m) || grad_of(bias)};
    for (int i = 0; i < mv.rows(); ++i)
      for (int j = 0; j < mv.cols(); ++j) n.value.at(i, j) += bv[static_cast<std::size_t>(j)];
    return push(std::move(n), "add_row_bias");
  }

  NodeId matmul(NodeId a, NodeId b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows())
      throw std::invalid_argument("matmul: inner extents differ (" + std::to_string(av.rank() == 2 ? av.cols() : -1) +
                                  " vs " + std::to_string(bv.rank() == 2 ? bv.rows() : -1) + ")");
    Node n{Op::MatMul, a, b, Tensor({av.rows(), bv.cols()}), grad_of(a) || grad_of(b)};
    detail::mm_nn(av.data(), bv.data(), n.value.data(), av.rows(), av.cols(), bv.cols(), false);
    return push(std::move(n), "matmul");
  }

  NodeId softmax(NodeId a) {
    const Tensor& av = value(a);
    if (av.rank() != 2 || av.cols() < 2) throw std::invalid_argument("softmax: need a matrix with at least 2 columns");
    Node n{Op::Softmax, a, -1, Tensor({av.rows(), av.cols()}), grad_of(a)};
    for (int i = 0; i < av.rows(); ++i) {
      double mx = av.at(i, 0);
      for (int j = 1; j < av.cols(); ++j) mx = std::max(mx, av.at(i, j));
      double denom = 0.0;
      for (int j = 0; j < av.cols(); ++j) {
        const double e = std::exp(av.at(i, j) - mx);
        n.value.at(i, j) = e;
        denom += e;
      }
      for (int j = 0; j < av.cols(); ++j) n.value.at(i, j) /= denom;
    }
    return push(std::move(n), "softmax");
  }

  NodeId pairwise_sq_dist(NodeId a, NodeId b) {
    Node n{Op::PairwiseSqDist, a, b, pairwise_sq_dist_values(value(a), value(b), a == b), grad_of(a) || grad_of(b)};
    return push(std::move(n), "pairwise_sq_dist");
  }

  NodeId slice_rows(NodeId a, int start, int count) {
    const Tensor& av = value(a);
    if (av.rank() != 2) throw std::invalid_argument("slice_rows: operand must be a matrix");
    if (start < 0 || count < 1 || start + count > av.rows())
      throw std::invalid_argument("slice_rows: range out of bounds");
    Node n{Op::SliceRows, a, -1, Tensor({count, av.cols()}), grad_of(a)};
    n.start = start;
    n.count = count;
    std::copy(av.data() + static_cast<std::size_t>(start) * av.cols(),
              av.data() + static_cast<std::size_t>(start + count) * av.cols(), n.value.data());
    return push(std::move(n), "slice_rows");
  }

  // --- reductions -----------------------------------------------------
  NodeId sum(NodeId a) {
    const Tensor& av = value(a);
    double s = 0.0;
    for (double v : av.values()) s += v;
    Node n{Op::Sum, a, -1, Tensor::scalar(s), grad_of(a)};
    return push(std::move(n), "sum");
  }

  NodeId mean(NodeId a) {
    const Tensor& av = value(a);
    double s = 0.0;
    for (double v : av.values()) s += v;
    Node n{Op::Mean, a, -1, Tensor::scalar(s / static_cast<double>(av.size())), grad_of(a)};
    return push(std::move(n), "mean");
  }

  // Mean cross-entropy of integer labels against rows of logits, fused with
  // log-sum-exp so large logits stay stable.
  NodeId cross_entropy_with_logits(NodeId logits, std::vector<int> labels) {
    const Tensor& lv = value(logits);
    if (lv.rank() != 2 || lv.cols() < 2)
      throw std::invalid_argument("cross_entropy: logits must be a matrix with at least 2 columns");
    if (static_cast<int>(labels.size()) != lv.rows())
      throw std::invalid_argument("cross_entropy: label count must equal logit rows");
    double acc = 0.0;
    for (int i = 0; i < lv.rows(); ++i) {
      const int y = labels[static_cast<std::size_t>(i)];
      if (y < 0 || y >= lv.cols())
        throw std::invalid_argument("cross_entropy: label " + std::to_string(y) + " out of range at row " +
                                    std::to_string(i));
      double mx = lv.at(i, 0);
      for (int j = 1; j < lv.cols(); ++j) mx = std::max(mx, lv.at(i, j));
      double denom = 0.0;
      for (int j = 0; j < lv.cols(); ++j) denom += std::exp(lv.at(i, j) - mx);
      acc += mx + std::log(denom) - lv.at(i, y);
    }
    Node n{Op::CrossEntropyLogits, logits, -1, Tensor::scalar(acc / lv.rows()), grad_of(logits)};
    n.labels = std::move(labels);
    return push(std::move(n), "cross_entropy");
  }

  // --- access ---------------------------------------------------------
  const Tensor& value(NodeId id) const { return node(id).value; }
  bool requires_grad(NodeId id) const { return node(id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Reverse accumulation from a scalar loss. Visits each node at most once,
  // in reverse topological (= construction) order.
  Gradients backward(NodeId loss) const {
    const Node& ln = node(loss);
    if (ln.value.size() != 1) throw std::invalid_argument("backward: loss must be a scalar");
    std::vector<std::optional<Tensor>> grad(static_cast<std::size_t>(loss) + 1);
    grad[static_cast<std::size_t>(loss)] = Tensor(ln.value.shape(), std::vector<double>(1, 1.0));

    const auto ensure = [&](NodeId id) -> Tensor& {
      auto& slot = grad[static_cast<std::size_t>(id)];
      if (!slot) slot = Tensor::zeros(node(id).value.shape());
      return *slot;
    };
    const auto wants = [&](NodeId id) { return id >= 0 && node(id).requires_grad; };

    for (NodeId id = loss; id >= 0; --id) {
      const auto& slot = grad[static_cast<std::size_t>(id)];
      if (!slot) continue;
      const Node& n = node(id);
      if (!n.requires_grad) continue;
      const Tensor& g = *slot;
      switch (n.op) {
        case Op::Leaf:
        case Op::Detach:
          break;
        case Op::Add: {
          if (wants(n.a)) accumulate(ensure(n.a), g, 1.0);
          if (wants(n.b)) accumulate(ensure(n.b), g, 1.0);
          break;
        }
        case Op::Sub: {
          if (wants(n.a)) accumulate(ensure(n.a), g, 1.0);
          if (wants(n.b)) accumulate(ensure(n.b), g, -1.0);
          break;
        }
        case Op::Mul: {
          if (wants(n.a)) accumulate_product(ensure(n.a), g, value(n.b));
          if (wants(n.b)) accumulate_product(ensure(n.b), g, value(n.a));
          break;
        }
        case Op::Scale: {
          if (wants(n.a)) accumulate(ensure(n.a), g, n.scalar);
          break;
        }
        case Op::AddRowBias: {
          if (wants(n.a)) accumulate(ensure(n.a), g, 1.0);
          if (wants(n.b)) {
            Tensor& gb = ensure(n.b);
            for (int i = 0; i < g.rows(); ++i)
              for (int j = 0; j < g.cols(); ++j) gb[static_cast<std::size_t>(j)] += g.at(i, j);
          }
          break;
        }
        case Op::MatMul: {
          const Tensor& av = value(n.a);
          const Tensor& bv = value(n.b);
          if (wants(n.a))  // dA = G . B^T
            detail::mm_nt(g.data(), bv.data(), ensure(n.a).data(), g.rows(), g.cols(), bv.rows(), true);
          if (wants(n.b))  // dB = A^T . G
            detail::mm_tn(av.data(), g.data(), ensure(n.b).data(), av.cols(), av.rows(), g.cols(), true);
          break;
        }
        case Op::Relu: {
          if (wants(n.a)) {
            Tensor& ga = ensure(n.a);
            const Tensor& av = value(n.a);
            for (std::size_t i = 0; i < g.size(); ++i)
              if (av[i] > 0.0) ga[i] += g[i];
          }
          break;
        }
        case Op::Softmax: {
          if (wants(n.a)) {
            Tensor& ga = ensure(n.a);
            const Tensor& p = n.value;
            for (int i = 0; i < p.rows(); ++i) {
              double dot = 0.0;
              for (int j = 0; j < p.cols(); ++j) dot += g.at(i, j) * p.at(i, j);
              for (int j = 0; j < p.cols(); ++j) ga.at(i, j) += p.at(i, j) * (g.at(i, j) - dot);
            }
          }
          break;
        }
        case Op::PairwiseSqDist: {
          const Tensor& av = value(n.a);
          const Tensor& bv = value(n.b);
          const int m = av.rows(), nn = bv.rows(), d = av.cols();
          if (wants(n.a)) {  // dA = 2 (rowsum(G) * A - G . B)
            Tensor gb_mat({m, d});
            detail::mm_nn(g.data(), bv.data(), gb_mat.data(), m, nn, d, false);
            Tensor& ga = ensure(n.a);
            for (int i = 0; i < m; ++i) {
              double rs = 0.0;
              for (int j = 0; j < nn; ++j) rs += g.at(i, j);
              for (int k = 0; k < d; ++k) ga.at(i, k) += 2.0 * (rs * av.at(i, k) - gb_mat.at(i, k));
            }
          }
          if (wants(n.b)) {  // dB = 2 (colsum(G) * B - G^T . A)
            Tensor gta({nn, d});
            detail::mm_tn(g.data(), av.data(), gta.data(), nn, m, d, false);
            Tensor& gb = ensure(n.b);
            for (int j = 0; j < nn; ++j) {
              double cs = 0.0;
              for (int i = 0; i < m; ++i) cs += g.at(i, j);
              for (int k = 0; k < d; ++k) gb.at(j, k) += 2.0 * (cs * bv.at(j, k) - gta.at(j, k));
            }
          }
          break;
        }
        case Op::SliceRows: {
          if (wants(n.a)) {
            Tensor& ga = ensure(n.a);
            const int c = ga.cols();
            for (int i = 0; i < n.count; ++i)
              for (int j = 0; j < c; ++j) ga.at(n.start + i, j) += g.at(i, j);
          }
          break;
        }
        case Op::Sum: {
          if (wants(n.a)) {
            Tensor& ga = ensure(n.a);
            const double gv = g.item();
            for (double& v : ga.values()) v += gv;
          }
          break;
        }
        case Op::Mean: {
          if (wants(n.a)) {
            Tensor& ga = ensure(n.a);
            const double gv = g.item() / static_cast<double>(ga.size());
            for (double& v : ga.values()) v += gv;
          }
          break;
        }
        case Op::CrossEntropyLogits: {
          if (wants(n.a)) {
            Tensor& ga = ensure(n.a);
            const Tensor& lv = value(n.a);
            const double gv = g.item() / static_cast<double>(lv.rows());
            for (int i = 0; i < lv.rows(); ++i) {
              double mx = lv.at(i, 0);
              for (int j = 1; j < lv.cols(); ++j) mx = std::max(mx, lv.at(i, j));
              double denom = 0.0;
              for (int j = 0; j < lv.cols(); ++j) denom += std::exp(lv.at(i, j) - mx);
              for (int j = 0; j < lv.cols(); ++j) {
                const double p = std::exp(lv.at(i, j) - mx) / denom;
                const double onehot = (j == n.labels[static_cast<std::size_t>(i)]) ? 1.0 : 0.0;
                ga.at(i, j) += gv * (p - onehot);
              }
            }
          }
          break;
        }
      }
    }

    Gradients out;
    for (NodeId id = 0; id <= loss; ++id) {
      const Node& n = node(id);
      if (n.op == Op::Leaf && n.requires_grad) {
        const auto& slot = grad[static_cast<std::size_t>(id)];
        out.grads_.emplace(id, slot ? *slot : Tensor::zeros(n.value.shape()));
      }
    }
    return out;
  }

 private:
  enum class Op {
    Leaf,
    Detach,
    Add,
    Sub,
    Mul,
    Scale,
    AddRowBias,
    MatMul,
    Relu,
    Softmax,
    PairwiseSqDist,
    SliceRows,
    Sum,
    Mean,
    CrossEntropyLogits
  };

  struct Node {
    Op op;
    NodeId a = -1, b = -1;
    Tensor value;
    bool requires_grad = false;
    double scalar = 0.0;        // Scale factor
    int start = 0, count = 0;   // SliceRows range
    std::vector<int> labels{};  // CrossEntropyLogits targets
  };

  const Node& node(NodeId id) const {
    if (id < 0 || id >= static_cast<NodeId>(nodes_.size()))
      throw std::out_of_range("tape: unknown node id " + std::to_string(id));
    return nodes_[static_cast<std::size_t>(id)];
  }

  bool grad_of(NodeId id) const { return node(id).requires_grad; }

  NodeId binary_elementwise(Op op, NodeId a, NodeId b, const char* name) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (!av.same_shape(bv)) throw std::invalid_argument(std::string(name) + ": shape mismatch");
    Node n{op, a, b, av, grad_of(a) || grad_of(b)};
    switch (op) {
      case Op::Add:
        for (std::size_t i = 0; i < bv.size(); ++i) n.value[i] += bv[i];
        break;
      case Op::Sub:
        for (std::size_t i = 0; i < bv.size(); ++i) n.value[i] -= bv[i];
        break;
      case Op::Mul:
        for (std::size_t i = 0; i < bv.size(); ++i) n.value[i] *= bv[i];
        break;
      default:
        throw std::logic_error("binary_elementwise: bad op");
    }
    return push(std::move(n), name);
  }

  NodeId push(Node n, const char* opname) {
    if (!n.value.all_finite())
      throw std::runtime_error(std::string(opname) + ": non-finite values produced");
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size()) - 1;
  }

  static void accumulate(Tensor& dst, const Tensor& src, double factor) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += factor * src[i];
  }
  static void accumulate_product(Tensor& dst, const Tensor& g, const Tensor& other) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i] * other[i];
  }

  std::vector<Node> nodes_;
};

// Central finite differences of f around `point`, compared coordinate-wise
// against `analytic`. Returns the worst relative error, where the relative
// error uses max(|analytic|, |numeric|, 1e-8) as denominator.
inline double finite_diff_check(const std::function<double(const Tensor&)>& f, const Tensor& point, double step,
                                const Tensor& analytic) {
  if (step <= 0.0) throw std::invalid_argument("finite_diff_check: step must be positive");
  if (!analytic.same_shape(point)) throw std::invalid_argument("finite_diff_check: gradient shape mismatch");
  Tensor x = point;
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + step;
    const double fp = f(x);
    x[i] = orig - step;
    const double fm = f(x);
    x[i] = orig;
    const double numeric = (fp - fm) / (2.0 * step);
    const double denom = std::max({std::fabs(analytic[i]), std::fabs(numeric), 1e-8});
    worst = std::max(worst, std::fabs(numeric - analytic[i]) / denom);
  }
  return worst;
}

}  // namespace lcmt
