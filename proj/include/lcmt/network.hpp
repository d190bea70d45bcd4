#pragma once
// MLP split into a feature extractor g and a classifier head h, plus the
// student/teacher parameter pair updated by exponential moving average.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lcmt/autodiff.hpp"
#include "lcmt/rng.hpp"

namespace lcmt {

struct MlpSpec {
  int input_dim = 2;
  std::vector<int> feature_layers{64, 64};  // hidden widths of g
  int latent_dim = 2;                       // width of the feature space z
  std::vector<int> head_layers{};           // hidden widths of h ([] = linear head)
  int class_count = 2;

  void validate() const {
    if (input_dim < 1) throw std::invalid_argument("mlp: input_dim must be >= 1");
    if (latent_dim < 1) throw std::invalid_argument("mlp: latent_dim must be >= 1");
    if (class_count < 2) throw std::invalid_argument("mlp: class_count must be >= 2");
    for (int w : feature_layers)
      if (w < 1) throw std::invalid_argument("mlp: feature layer widths must be >= 1");
    for (int w : head_layers)
      if (w < 1) throw std::invalid_argument("mlp: head layer widths must be >= 1");
  }

  // (fan_in, fan_out) per linear layer; the final g layer maps into the
  // latent space, the final h layer maps onto class logits.
  std::vector<std::pair<int, int>> feature_dims() const {
    std::vector<std::pair<int, int>> out;
    int in = input_dim;
    for (int w : feature_layers) {
      out.emplace_back(in, w);
      in = w;
    }
    out.emplace_back(in, latent_dim);
    return out;
  }

  std::vector<std::pair<int, int>> head_dims() const {
    std::vector<std::pair<int, int>> out;
    int in = latent_dim;
    for (int w : head_layers) {
      out.emplace_back(in, w);
      in = w;
    }
    out.emplace_back(in, class_count);
    return out;
  }
};

// Weights and biases, partitioned into the extractor (g) and the head (h).
struct Params {
  std::vector<Tensor> w_g, b_g, w_h, b_h;

  // Canonical iteration order used everywhere a flat view is needed
  // (optimizer state, gradients, checkpoint records).
  template <class F>
  void for_each_tensor(F&& f) {
    for (std::size_t i = 0; i < w_g.size(); ++i) {
      f("g" + std::to_string(i) + ".w", w_g[i]);
      f("g" + std::to_string(i) + ".b", b_g[i]);
    }
    for (std::size_t i = 0; i < w_h.size(); ++i) {
      f("h" + std::to_string(i) + ".w", w_h[i]);
      f("h" + std::to_string(i) + ".b", b_h[i]);
    }
  }

  template <class F>
  void for_each_tensor(F&& f) const {
    for (std::size_t i = 0; i < w_g.size(); ++i) {
      f("g" + std::to_string(i) + ".w", w_g[i]);
      f("g" + std::to_string(i) + ".b", b_g[i]);
    }
    for (std::size_t i = 0; i < w_h.size(); ++i) {
      f("h" + std::to_string(i) + ".w", w_h[i]);
      f("h" + std::to_string(i) + ".b", b_h[i]);
    }
  }

  std::size_t tensor_count() const { return 2 * (w_g.size() + w_h.size()); }
};

// He-style init: weights N(0, sqrt(2/fan_in)), biases zero. Deterministic in
// the seed: same seed gives bitwise-identical parameters.
inline Params init_params(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  const auto init_layer = [&](int fan_in, int fan_out, std::vector<Tensor>& ws, std::vector<Tensor>& bs) {
    Tensor w({fan_in, fan_out});
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (double& v : w.values()) v = rng.normal(0.0, stddev);
    ws.push_back(std::move(w));
    bs.push_back(Tensor::zeros({fan_out}));
  };
  Params p;
  for (auto [in, out] : spec.feature_dims()) init_layer(in, out, p.w_g, p.b_g);
  for (auto [in, out] : spec.head_dims()) init_layer(in, out, p.w_h, p.b_h);
  return p;
}

// Tape node ids mirroring Params.
struct ParamNodes {
  std::vector<Tape::NodeId> w_g, b_g, w_h, b_h;

  std::vector<Tape::NodeId> flat() const {  // matches Params::for_each_tensor order
    std::vector<Tape::NodeId> out;
    for (std::size_t i = 0; i < w_g.size(); ++i) {
      out.push_back(w_g[i]);
      out.push_back(b_g[i]);
    }
    for (std::size_t i = 0; i < w_h.size(); ++i) {
      out.push_back(w_h[i]);
      out.push_back(b_h[i]);
    }
    return out;
  }
};

inline ParamNodes stage_params(Tape& t, const Params& p, bool trainable = true) {
  ParamNodes pn;
  const auto stage = [&](const Tensor& v) { return trainable ? t.variable(v) : t.constant(v); };
  for (const Tensor& w : p.w_g) pn.w_g.push_back(stage(w));
  for (const Tensor& b : p.b_g) pn.b_g.push_back(stage(b));
  for (const Tensor& w : p.w_h) pn.w_h.push_back(stage(w));
  for (const Tensor& b : p.b_h) pn.b_h.push_back(stage(b));
  return pn;
}

// z = g(x): ReLU after every hidden layer, linear output into latent space.
inline Tape::NodeId forward_features(Tape& t, const ParamNodes& pn, Tape::NodeId x) {
  Tape::NodeId h = x;
  for (std::size_t i = 0; i < pn.w_g.size(); ++i) {
    h = t.add_row_bias(t.matmul(h, pn.w_g[i]), pn.b_g[i]);
    if (i + 1 < pn.w_g.size()) h = t.relu(h);
  }
  return h;
}

// logits = h(z): ReLU after every hidden layer, linear output onto K logits.
inline Tape::NodeId forward_head(Tape& t, const ParamNodes& pn, Tape::NodeId z) {
  Tape::NodeId h = z;
  for (std::size_t i = 0; i < pn.w_h.size(); ++i) {
    h = t.add_row_bias(t.matmul(h, pn.w_h[i]), pn.b_h[i]);
    if (i + 1 < pn.w_h.size()) h = t.relu(h);
  }
  return h;
}

inline Tape::NodeId forward_logits(Tape& t, const ParamNodes& pn, Tape::NodeId x) {
  return forward_head(t, pn, forward_features(t, pn, x));
}

inline Tape::NodeId forward_probs(Tape& t, const ParamNodes& pn, Tape::NodeId x) {
  return t.softmax(forward_logits(t, pn, x));
}

// Value-level forwards on a throwaway tape (evaluation, teacher targets).
inline Tensor forward_features_value(const Params& p, const Tensor& x) {
  Tape t;
  const ParamNodes pn = stage_params(t, p, false);
  return t.value(forward_features(t, pn, t.constant(x)));
}

inline Tensor forward_probs_value(const Params& p, const Tensor& x) {
  Tape t;
  const ParamNodes pn = stage_params(t, p, false);
  return t.value(forward_probs(t, pn, t.constant(x)));
}

// Student/teacher pair; the teacher starts as a copy of the student and is
// only ever moved by ema_update, never by the optimizer.
struct StudentTeacher {
  Params student;
  Params teacher;
  double alpha = 0.99;
  long long step = 0;
};

inline StudentTeacher make_student_teacher(const MlpSpec& spec, double alpha, std::uint64_t seed) {
  if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("ema: alpha must lie in [0, 1]");
  StudentTeacher st;
  st.student = init_params(spec, seed);
  st.teacher = st.student;
  st.alpha = alpha;
  return st;
}

// teacher <- alpha * teacher + (1 - alpha) * student, elementwise.
inline void ema_update(StudentTeacher& st) {
  const double a = st.alpha;
  const auto blend = [a](std::vector<Tensor>& tv, const std::vector<Tensor>& sv) {
    for (std::size_t i = 0; i < tv.size(); ++i)
      for (std::size_t j = 0; j < tv[i].size(); ++j) tv[i][j] = a * tv[i][j] + (1.0 - a) * sv[i][j];
  };
  blend(st.teacher.w_g, st.student.w_g);
  blend(st.teacher.b_g, st.student.b_g);
  blend(st.teacher.w_h, st.student.w_h);
  blend(st.teacher.b_h, st.student.b_h);
}

}  // namespace lcmt
