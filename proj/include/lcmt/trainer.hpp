#pragma once
// Nesterov SGD, the per-iteration training step, evaluation, collapse
// detection, and the epoch loop with its two-phase curriculum.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lcmt/config.hpp"
#include "lcmt/data.hpp"
#include "lcmt/network.hpp"
#include "lcmt/objective.hpp"
#include "lcmt/persistence.hpp"
#include "lcmt/schedule.hpp"

namespace lcmt {

// Stream tags for deriving independent sub-streams from the run seed.
inline constexpr std::uint64_t kStreamData = 0xda7a;
inline constexpr std::uint64_t kStreamSplit = 0x511f;
inline constexpr std::uint64_t kStreamInit = 0x1217;
inline constexpr std::uint64_t kStreamBatch = 0xba7c;
inline constexpr std::uint64_t kStreamPerturb = 0x9e27;

struct OptimState {
  double momentum = 0.9;
  std::vector<Tensor> velocity;  // aligned with Params::for_each_tensor order
};

inline OptimState make_optim_state(const Params& p, double momentum) {
  if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("optim: momentum must lie in [0, 1)");
  OptimState s;
  s.momentum = momentum;
  p.for_each_tensor([&](const std::string&, const Tensor& t) { s.velocity.push_back(Tensor::zeros(t.shape())); });
  return s;
}

// v <- mu v - lr g;  theta <- theta + mu v_new - lr g   (Nesterov form)
inline void sgd_nesterov_step(Tensor& param, const Tensor& grad, Tensor& velocity, double lr, double momentum) {
  if (!param.same_shape(grad) || !param.same_shape(velocity))
    throw std::invalid_argument("optim: parameter, gradient and velocity shapes must match");
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double v = momentum * velocity[i] - lr * grad[i];
    velocity[i] = v;
    param[i] += momentum * v - lr * grad[i];
  }
}

inline void sgd_nesterov_step(Params& params, const std::vector<const Tensor*>& grads, OptimState& state, double lr) {
  if (grads.size() != state.velocity.size() || grads.size() != params.tensor_count())
    throw std::invalid_argument("optim: gradient list does not match parameter list");
  std::size_t i = 0;
  params.for_each_tensor([&](const std::string&, Tensor& t) {
    sgd_nesterov_step(t, *grads[i], state.velocity[i], lr, state.momentum);
    ++i;
  });
}

// Argmax per row; ties resolve to the lowest class index.
inline std::vector<int> predict_labels(const Params& p, const Tensor& x) {
  const Tensor probs = forward_probs_value(p, x);
  std::vector<int> out(static_cast<std::size_t>(probs.rows()));
  for (int i = 0; i < probs.rows(); ++i) {
    int best = 0;
    for (int j = 1; j < probs.cols(); ++j)
      if (probs.at(i, j) > probs.at(i, best)) best = j;
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

// Error rate over every row of the dataset, on clean (unperturbed) inputs.
inline double evaluate(const Params& p, const Dataset& ds) {
  const auto pred = predict_labels(p, ds.X);
  int wrong = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (pred[i] != ds.y[i]) ++wrong;
  return static_cast<double>(wrong) / static_cast<double>(pred.size());
}

// Mean over latent dimensions of the per-dimension variance across rows.
inline double mean_feature_variance(const Tensor& z) {
  if (z.rank() != 2 || z.rows() < 2) throw std::invalid_argument("variance: need at least 2 rows");
  const int n = z.rows(), d = z.cols();
  double acc = 0.0;
  for (int j = 0; j < d; ++j) {
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += z.at(i, j);
    mean /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) {
      const double dv = z.at(i, j) - mean;
      var += dv * dv;
    }
    acc += var / n;
  }
  return acc / d;
}

struct CollapseStatus {
  double feature_variance = 0.0;
  bool flagged = false;
};

// Flags when the latent spread drops below tau; tau = 0 never flags.
inline CollapseStatus detect_collapse(const Tensor& z, double tau) {
  if (tau < 0.0) throw std::invalid_argument("collapse: tau must be >= 0");
  CollapseStatus s;
  s.feature_variance = mean_feature_variance(z);
  s.flagged = tau > 0.0 && s.feature_variance < tau;
  return s;
}

// Median over squared distances of all unordered row pairs (i < j).
inline double median_pairwise_sq_dist(const Tensor& z) {
  if (z.rank() != 2 || z.rows() < 2) throw std::invalid_argument("median distance: need at least 2 rows");
  const Tensor d2 = pairwise_sq_dist_values(z, z, true);
  std::vector<double> vals;
  vals.reserve(static_cast<std::size_t>(z.rows()) * (z.rows() - 1) / 2);
  for (int i = 0; i < z.rows(); ++i)
    for (int j = i + 1; j < z.rows(); ++j) vals.push_back(d2.at(i, j));
  const std::size_t mid = vals.size() / 2;
  std::nth_element(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(mid), vals.end());
  const double hi = vals[mid];
  if (vals.size() % 2 == 1) return hi;
  const double lo = *std::max_element(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

// One optimization step's graph: student forward on the stacked views, all
// loss terms, and the ids needed to read gradients back out.
struct LossGraph {
  Tape::NodeId total = -1;
  Tape::NodeId ce = -1;
  Tape::NodeId cons = -1;
  Tape::NodeId lc = -1;  // -1 when the clustering term is not in the graph
  ParamNodes params;
  std::optional<BatchGraph> graph_lu, graph_uu;
};

inline LossGraph build_loss_graph(Tape& t, const Params& student, const Tensor& x_labeled, const Tensor& x_unlabeled,
                                  const std::vector<int>& labels, const Tensor& teacher_probs, double lambda1,
                                  double lambda2, const GraphConfig& graph, const BatchGraph* frozen_lu = nullptr,
                                  const BatchGraph* frozen_uu = nullptr) {
  const int b_l = x_labeled.rows();
  const int b_u = x_unlabeled.rows();
  if (static_cast<int>(labels.size()) != b_l)
    throw std::invalid_argument("train step: label count must equal labeled rows");
  if (teacher_probs.rank() != 2 || teacher_probs.rows() != b_l + b_u)
    throw std::invalid_argument("train step: teacher probabilities must cover the full batch");

  LossGraph out;
  out.params = stage_params(t, student, true);
  const Tape::NodeId x = t.constant(vstack(x_labeled, x_unlabeled));
  const Tape::NodeId z = forward_features(t, out.params, x);
  const Tape::NodeId logits = forward_head(t, out.params, z);
  const Tape::NodeId probs = t.softmax(logits);

  out.ce = cross_entropy(t, t.slice_rows(logits, 0, b_l), labels);
  out.cons = consistency_loss(t, probs, t.constant(teacher_probs));

  if (lambda2 > 0.0 && graph.epsilon > 0.0) {
    const Tape::NodeId z_l = t.slice_rows(z, 0, b_l);
    const Tape::NodeId z_u = t.slice_rows(z, b_l, b_u);
    LcLoss lc = local_clustering_loss(t, z_l, z_u, graph, frozen_lu, frozen_uu);
    out.lc = lc.node;
    out.graph_lu = std::move(lc.lu);
    out.graph_uu = std::move(lc.uu);
  }
  out.total = total_loss(t, out.ce, out.cons, out.lc, LossWeights{lambda1, lambda2});
  return out;
}

// One iteration: perturb views, teacher targets off-tape, student forward,
// backward, Nesterov update, EMA update. Draw order from the perturbation
// stream: student labeled, student unlabeled, teacher labeled, teacher
// unlabeled.
inline LossBreakdown train_step(StudentTeacher& st, OptimState& opt, const Batch& batch, const PerturbSpec& ps,
                                double lambda1, double lambda2, const GraphConfig& graph, double lr,
                                Rng& perturb_rng) {
  const Tensor xl_student = perturb(batch.x_labeled, ps, perturb_rng);
  const Tensor xu_student = perturb(batch.x_unlabeled, ps, perturb_rng);
  const Tensor xl_teacher = perturb(batch.x_labeled, ps, perturb_rng);
  const Tensor xu_teacher = perturb(batch.x_unlabeled, ps, perturb_rng);
  const Tensor teacher_probs = forward_probs_value(st.teacher, vstack(xl_teacher, xu_teacher));

  Tape tape;
  const LossGraph g =
      build_loss_graph(tape, st.student, xl_student, xu_student, batch.labels, teacher_probs, lambda1, lambda2, graph);
  const Gradients grads = tape.backward(g.total);

  std::vector<const Tensor*> gp;
  for (Tape::NodeId id : g.params.flat()) gp.push_back(&grads.at(id));
  sgd_nesterov_step(st.student, gp, opt, lr);
  st.step += 1;
  ema_update(st);

  LossBreakdown bd;
  bd.ce = tape.value(g.ce).item();
  bd.cons = tape.value(g.cons).item();
  bd.lc = g.lc >= 0 ? tape.value(g.lc).item() : 0.0;
  bd.total = tape.value(g.total).item();
  return bd;
}

// Builds the dataset a config describes: generate (or load) then apply the
// stratified split. Deterministic in cfg alone.
inline Dataset make_dataset(const TrainConfig& cfg) {
  cfg.validate();
  Dataset ds;
  if (cfg.data_kind == "two_moons")
    ds = gen_two_moons(cfg.data_n, cfg.data_noise, derive_seed(cfg.seed, kStreamData));
  else if (cfg.data_kind == "blobs")
    ds = gen_blobs(cfg.data_n, ring_centers(cfg.blob_centers, cfg.blob_radius), cfg.blob_sigma,
                   derive_seed(cfg.seed, kStreamData));
  else if (cfg.data_kind == "circles")
    ds = gen_circles(cfg.data_n, cfg.data_noise, derive_seed(cfg.seed, kStreamData), cfg.circle_factor);
  else
    ds = load_csv(cfg.data_path);
  return split_labeled(ds, cfg.n_labeled, derive_seed(cfg.seed, kStreamSplit));
}

struct RunResult {
  std::vector<EpochMetrics> history;
  bool collapsed = false;
  int last_epoch = -1;
  double resolved_epsilon = 0.0;  // 0 while the regularizer is off
  double resolved_tau = 0.0;
  StudentTeacher state;
  double final_student_error = 1.0;
  double final_teacher_error = 1.0;
};

using StepHook = std::function<void(int epoch, int iter, const StudentTeacher&)>;

namespace detail {

inline Params params_like(const MlpSpec& spec) {
  Params p;
  for (auto [in, out] : spec.feature_dims()) {
    p.w_g.push_back(Tensor({in, out}));
    p.b_g.push_back(Tensor({out}));
  }
  for (auto [in, out] : spec.head_dims()) {
    p.w_h.push_back(Tensor({in, out}));
    p.b_h.push_back(Tensor({out}));
  }
  return p;
}

}  // namespace detail

// Reconstructs a parameter set from checkpoint records under the given
// prefix ("student" / "teacher" / "velocity"), validating shapes against the
// architecture the config describes.
inline Params params_from_checkpoint(const Checkpoint& c, const MlpSpec& spec, const std::string& prefix) {
  Params p = detail::params_like(spec);
  p.for_each_tensor([&](const std::string& name, Tensor& t) {
    const Tensor* rec = c.find(prefix + "." + name);
    if (!rec) throw std::runtime_error("checkpoint: missing record " + prefix + "." + name);
    if (!rec->same_shape(t)) {
      std::string want = "[", got = "[";
      for (int e : t.shape()) want += std::to_string(e) + " ";
      for (int e : rec->shape()) got += std::to_string(e) + " ";
      throw std::runtime_error("checkpoint: record " + prefix + "." + name + " has shape " + got +
                               "], expected " + want + "] for the configured architecture");
    }
    t = *rec;
  });
  return p;
}

// The epoch loop. Writes metrics and checkpoints under out_dir when it is
// non-empty; pass a checkpoint to continue a run bit-for-bit. The optional
// hook fires after every optimizer step.
inline RunResult run_training(const TrainConfig& cfg, const Dataset& ds, const std::string& out_dir = "",
                              const Checkpoint* resume = nullptr, const StepHook& hook = {}) {
  cfg.validate();
  ds.validate();
  const MlpSpec spec = cfg.mlp_spec(ds.feature_dim(), ds.class_count);
  const Curriculum cur = cfg.curriculum();
  cur.validate();

  StudentTeacher st;
  OptimState opt;
  BatchSampler sampler(ds, cfg.batch_spec(), derive_seed(cfg.seed, kStreamBatch));
  Rng perturb_rng(derive_seed(cfg.seed, kStreamPerturb));

  // Regularizer state. epsilon: explicit (>0, times scale), disabled (0), or
  // pending auto-resolution at the phase switch (<0 in the config).
  const bool lc_configured = cfg.lambda2 > 0.0 && cfg.graph_epsilon != 0.0;
  double resolved_eps = cfg.graph_epsilon > 0.0 ? cfg.graph_epsilon * cfg.graph_epsilon_scale : 0.0;
  bool eps_pending = cfg.graph_epsilon < 0.0;
  double tau = cfg.collapse_tau > 0.0 ? cfg.collapse_tau : 0.0;
  bool tau_pending = cfg.collapse_tau < 0.0;
  int collapse_streak = 0;
  int start_epoch = 0;

  if (resume) {
    if (resume->config_text != render_config(cfg))
      throw std::runtime_error("resume: config does not match the checkpoint echo");
    st.student = params_from_checkpoint(*resume, spec, "student");
    st.teacher = params_from_checkpoint(*resume, spec, "teacher");
    st.alpha = cfg.ema_alpha;
    st.step = static_cast<long long>(resume->step);
    opt.momentum = cfg.momentum;
    {
      const Params vel = params_from_checkpoint(*resume, spec, "velocity");
      vel.for_each_tensor([&](const std::string&, const Tensor& t) { opt.velocity.push_back(t); });
    }
    const auto meta = [&](const char* name) {
      const Tensor* t = resume->find(name);
      if (!t) throw std::runtime_error(std::string("checkpoint: missing record ") + name);
      return t->item();
    };
    resolved_eps = meta("meta.resolved_epsilon");
    eps_pending = meta("meta.epsilon_pending") != 0.0;
    tau = meta("meta.collapse_tau");
    tau_pending = meta("meta.tau_pending") != 0.0;
    collapse_streak = static_cast<int>(meta("meta.collapse_streak"));
    const std::size_t nl = resume->rng_state.find('\n');
    if (nl == std::string::npos) throw std::runtime_error("checkpoint: bad rng state");
    sampler.restore(resume->rng_state.substr(0, nl));
    perturb_rng.restore(resume->rng_state.substr(nl + 1));
    start_epoch = static_cast<int>(resume->epoch) + 1;
  } else {
    st = make_student_teacher(spec, cfg.ema_alpha, derive_seed(cfg.seed, kStreamInit));
    opt = make_optim_state(st.student, cfg.momentum);
  }

  const bool io = !out_dir.empty();
  const std::string metrics_path = out_dir + "/metrics.csv";
  if (io) {
    std::filesystem::create_directories(out_dir);
    std::filesystem::remove(metrics_path);  // a run owns its metrics file
  }

  const auto write_checkpoint = [&](const std::string& path, int epoch) {
    Checkpoint c;
    c.step = static_cast<std::uint64_t>(st.step);
    c.epoch = epoch;
    st.student.for_each_tensor([&](const std::string& n, const Tensor& t) { c.tensors.emplace_back("student." + n, t); });
    st.teacher.for_each_tensor([&](const std::string& n, const Tensor& t) { c.tensors.emplace_back("teacher." + n, t); });
    {
      std::size_t i = 0;
      st.student.for_each_tensor([&](const std::string& n, const Tensor&) {
        c.tensors.emplace_back("velocity." + n, opt.velocity[i]);
        ++i;
      });
    }
    c.tensors.emplace_back("meta.resolved_epsilon", Tensor::scalar(resolved_eps));
    c.tensors.emplace_back("meta.epsilon_pending", Tensor::scalar(eps_pending ? 1.0 : 0.0));
    c.tensors.emplace_back("meta.collapse_tau", Tensor::scalar(tau));
    c.tensors.emplace_back("meta.tau_pending", Tensor::scalar(tau_pending ? 1.0 : 0.0));
    c.tensors.emplace_back("meta.collapse_streak", Tensor::scalar(collapse_streak));
    c.rng_state = sampler.save() + "\n" + perturb_rng.save();
    c.config_text = render_config(cfg);
    save_checkpoint(path, c);
  };

  const int iters_per_epoch = std::max(1, ds.n_unlabeled() / cfg.batch_unlabeled);
  RunResult result;

  for (int epoch = start_epoch; epoch < cfg.total_epochs; ++epoch) {
    // Phase switch: resolve the neighborhood scale and the collapse
    // threshold from the current latent geometry, once.
    if (lc_configured && epoch >= cfg.mt_epochs && (eps_pending || tau_pending)) {
      const Tensor z = forward_features_value(st.student, ds.X);
      if (eps_pending) {
        const double med = median_pairwise_sq_dist(z);
        resolved_eps = med > 0.0 ? med * cfg.graph_epsilon_scale : 0.0;
        eps_pending = false;
      }
      if (tau_pending) {
        tau = 1e-6 * mean_feature_variance(z);
        tau_pending = false;
      }
    }

    LossBreakdown acc;
    for (int it = 0; it < iters_per_epoch; ++it) {
      const double frac = epoch + static_cast<double>(it) / iters_per_epoch;
      const LossCoefficients co = active_losses(frac, cur);
      const double lr = lr_at(frac, cur.lr);
      const double l2 = (lc_configured && !eps_pending && resolved_eps > 0.0) ? co.lambda2 : 0.0;
      const auto [li, ui] = sampler.next_indices();
      const Batch b = assemble_batch(ds, li, ui);
      const LossBreakdown bd =
          train_step(st, opt, b, cfg.perturb_spec(), co.lambda1, l2, GraphConfig{resolved_eps}, lr, perturb_rng);
      acc.ce += bd.ce;
      acc.cons += bd.cons;
      acc.lc += bd.lc;
      acc.total += bd.total;
      if (hook) hook(epoch, it, st);
    }

    bool halted = false;
    const bool eval_now = epoch % cfg.eval_every == 0 || epoch == cfg.total_epochs - 1;
    if (eval_now) {
      EpochMetrics m;
      m.epoch = epoch;
      m.student_error = evaluate(st.student, ds);
      m.teacher_error = evaluate(st.teacher, ds);
      m.ce = acc.ce / iters_per_epoch;
      m.cons = acc.cons / iters_per_epoch;
      m.lc = acc.lc / iters_per_epoch;
      const LossCoefficients co = active_losses(static_cast<double>(epoch), cur);
      m.lambda1 = co.lambda1;
      m.lambda2 = co.lambda2;
      m.lr = lr_at(static_cast<double>(epoch), cur.lr);
      const Tensor z = forward_features_value(st.student, ds.X);
      m.feature_variance = mean_feature_variance(z);
      const bool lc_active = lc_configured && !eps_pending && resolved_eps > 0.0 && epoch >= cfg.mt_epochs;
      if (lc_active && !tau_pending) m.collapse_flag = detect_collapse(z, tau).flagged;
      collapse_streak = m.collapse_flag ? collapse_streak + 1 : 0;
      result.history.push_back(m);
      if (io) append_metrics(metrics_path, m);
      if (collapse_streak >= 3) {
        result.collapsed = true;
        halted = true;
      }
    }

    if (io && (epoch + 1) % cfg.checkpoint_every == 0)
      write_checkpoint(out_dir + "/checkpoint_epoch_" + std::to_string(epoch) + ".ckpt", epoch);

    result.last_epoch = epoch;
    if (halted) break;
  }

  if (io) write_checkpoint(out_dir + "/final.ckpt", result.last_epoch);
  result.resolved_epsilon = eps_pending ? 0.0 : resolved_eps;
  result.resolved_tau = tau_pending ? 0.0 : tau;
  if (!result.history.empty()) {
    result.final_student_error = result.history.back().student_error;
    result.final_teacher_error = result.history.back().teacher_error;
  }
  result.state = std::move(st);
  return result;
}

}  // namespace lcmt
