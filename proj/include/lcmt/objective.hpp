#pragma once
// The four-part training objective: supervised cross-entropy, the
// student/teacher consistency penalty, the batch neighbor graph, and the
// local clustering regularizer that contracts latent distances along graph
// edges. Edge weights are computed off-tape and enter the loss as constants,
// so no gradient ever flows through a weight.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "lcmt/autodiff.hpp"

namespace lcmt {

struct GraphConfig {
  // Neighborhood scale. Positive: pairs with squared distance <= epsilon are
  // connected. Zero: the documented "regularizer disabled" sentinel.
  double epsilon = 0.0;

  void validate() const {
    if (epsilon < 0.0) throw std::invalid_argument("graph: epsilon must be >= 0");
  }
};

enum class PairKind { LabeledUnlabeled, UnlabeledUnlabeled };

struct BatchGraph {
  Tensor weights;  // [m x n]; for UnlabeledUnlabeled the diagonal is zero
  PairKind kind = PairKind::LabeledUnlabeled;
};

// w_ij = exp(-d2_ij / eps) when d2_ij <= eps, else 0. With eps = 0 every
// weight is 0. Nonzero weights therefore lie in [e^-1, 1].
inline BatchGraph edge_weights(const Tensor& za, const Tensor& zb, const GraphConfig& cfg, PairKind kind) {
  cfg.validate();
  const bool self = kind == PairKind::UnlabeledUnlabeled;
  Tensor d2 = pairwise_sq_dist_values(za, zb, self);
  BatchGraph g;
  g.kind = kind;
  g.weights = Tensor({d2.rows(), d2.cols()});
  if (cfg.epsilon > 0.0) {
    for (int i = 0; i < d2.rows(); ++i)
      for (int j = 0; j < d2.cols(); ++j) {
        const double v = d2.at(i, j);
        g.weights.at(i, j) = v <= cfg.epsilon ? std::exp(-v / cfg.epsilon) : 0.0;
      }
    if (self)
      for (int i = 0; i < std::min(d2.rows(), d2.cols()); ++i) g.weights.at(i, i) = 0.0;
  }
  return g;
}

// Mean cross-entropy of integer labels against class logits.
inline Tape::NodeId cross_entropy(Tape& t, Tape::NodeId logits, std::vector<int> labels) {
  return t.cross_entropy_with_logits(logits, std::move(labels));
}

// Mean squared difference between two probability tables. The teacher side is
// detached, so gradient reaches the student only.
inline Tape::NodeId consistency_loss(Tape& t, Tape::NodeId student_probs, Tape::NodeId teacher_probs) {
  const Tape::NodeId target = t.detach(teacher_probs);
  const Tape::NodeId diff = t.sub(student_probs, target);
  return t.mean(t.mul(diff, diff));
}

struct LcLoss {
  Tape::NodeId node = -1;
  std::optional<BatchGraph> lu;  // labeled x unlabeled weights actually used
  std::optional<BatchGraph> uu;  // unlabeled x unlabeled weights actually used
};

// Local clustering penalty over a batch:
//   mean over labeled x unlabeled pairs of w_ij d2_ij
// + mean over unordered unlabeled pairs (m < n) of w_mn d2_mn.
// Labeled x labeled pairs never appear. Weights are constants on the tape;
// pass frozen graphs to reuse weights from another evaluation point.
inline LcLoss local_clustering_loss(Tape& t, Tape::NodeId z_l, Tape::NodeId z_u, const GraphConfig& cfg,
                                    const BatchGraph* frozen_lu = nullptr, const BatchGraph* frozen_uu = nullptr) {
  cfg.validate();
  LcLoss out;
  const int b_l = t.value(z_l).rows();
  const int b_u = t.value(z_u).rows();
  if (cfg.epsilon == 0.0) {
    out.node = t.constant(Tensor::scalar(0.0));
    return out;
  }

  out.lu = frozen_lu ? *frozen_lu : edge_weights(t.value(z_l), t.value(z_u), cfg, PairKind::LabeledUnlabeled);
  const Tape::NodeId d2_lu = t.pairwise_sq_dist(z_l, z_u);
  Tape::NodeId loss = t.mean(t.mul(t.constant(out.lu->weights), d2_lu));

  if (b_u >= 2) {
    out.uu = frozen_uu ? *frozen_uu : edge_weights(t.value(z_u), t.value(z_u), cfg, PairKind::UnlabeledUnlabeled);
    // keep strictly-upper entries only: each unordered pair counted once
    Tensor upper = Tensor::zeros({b_u, b_u});
    for (int i = 0; i < b_u; ++i)
      for (int j = i + 1; j < b_u; ++j) upper.at(i, j) = out.uu->weights.at(i, j);
    const Tape::NodeId d2_uu = t.pairwise_sq_dist(z_u, z_u);
    const double pairs = static_cast<double>(b_u) * (b_u - 1) / 2.0;
    const Tape::NodeId term = t.scale(t.sum(t.mul(t.constant(upper), d2_uu)), 1.0 / pairs);
    loss = t.add(loss, term);
  }
  (void)b_l;
  out.node = loss;
  return out;
}

struct LossWeights {
  double lambda1 = 0.0;  // consistency coefficient
  double lambda2 = 0.0;  // clustering coefficient

  void validate() const {
    if (lambda1 < 0.0 || lambda2 < 0.0) throw std::invalid_argument("loss weights must be >= 0");
  }
};

struct LossBreakdown {
  double ce = 0.0;
  double cons = 0.0;
  double lc = 0.0;
  double total = 0.0;
};

// total = ce + lambda1 * cons + lambda2 * lc; pass lc = -1 when the
// clustering term is not part of the graph for this step.
inline Tape::NodeId total_loss(Tape& t, Tape::NodeId ce, Tape::NodeId cons, Tape::NodeId lc, const LossWeights& w) {
  w.validate();
  Tape::NodeId out = t.add(ce, t.scale(cons, w.lambda1));
  if (lc >= 0) out = t.add(out, t.scale(lc, w.lambda2));
  return out;
}

}  // namespace lcmt
