#pragma once
// Run configuration: typed fields with defaults, the line-oriented
// `key = value` parser, command-line overrides, and a canonical rendering
// that round-trips (parse(render(cfg)) == cfg).

#include <climits>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lcmt/data.hpp"
#include "lcmt/network.hpp"
#include "lcmt/schedule.hpp"
#include "lcmt/strings.hpp"

namespace lcmt {

struct TrainConfig {
  // data
  std::string data_kind;  // two_moons | blobs | circles | csv (required)
  std::string data_path;  // source file for kind = csv
  int data_n = 1000;
  double data_noise = 0.1;
  int n_labeled = 6;
  int blob_centers = 3;
  double blob_radius = 3.0;
  double blob_sigma = 0.5;
  double circle_factor = 0.5;
  // model
  std::vector<int> feature_layers{64, 64};
  int latent_dim = 2;
  std::vector<int> head_layers{};
  // neighbor graph
  double graph_epsilon = -1.0;  // >0 fixed; 0 disables the regularizer;
                                // <0 resolves to the median squared latent
                                // distance when the regularizer switches on
  double graph_epsilon_scale = 1.0;
  // loss maxima
  double lambda1 = 10.0;
  double lambda2 = 5.0;
  // schedule
  int cons_rampup_epochs = 5;
  int mt_epochs = 200;  // warm-up phase before the regularizer ramps in
  int lc_rampup_epochs = 50;
  int total_epochs = 300;
  double lr = 0.05;
  int lr_decay_start = 250;
  int lr_decay_epochs = 50;
  // batching / perturbation
  int batch_labeled = 6;
  int batch_unlabeled = 128;
  double perturb_sigma = 0.1;
  double perturb_jitter = 0.0;
  // training
  double ema_alpha = 0.99;
  double momentum = 0.9;
  std::uint64_t seed = 1;
  int eval_every = 5;
  int checkpoint_every = 50;
  double collapse_tau = -1.0;  // <0 resolves to 1e-6 x feature variance when
                               // the regularizer switches on; 0 never flags

  MlpSpec mlp_spec(int input_dim, int class_count) const {
    MlpSpec s;
    s.input_dim = input_dim;
    s.feature_layers = feature_layers;
    s.latent_dim = latent_dim;
    s.head_layers = head_layers;
    s.class_count = class_count;
    return s;
  }

  Curriculum curriculum() const {
    Curriculum c;
    c.mt_only_epochs = mt_epochs;
    c.cons_rampup = RampUp{0.0, static_cast<double>(cons_rampup_epochs), lambda1};
    c.lc_rampup = RampUp{static_cast<double>(mt_epochs), static_cast<double>(lc_rampup_epochs), lambda2};
    c.lr = LrPlan{lr, static_cast<double>(lr_decay_start), static_cast<double>(lr_decay_epochs)};
    c.total_epochs = total_epochs;
    return c;
  }

  BatchSpec batch_spec() const { return BatchSpec{batch_labeled, batch_unlabeled}; }
  PerturbSpec perturb_spec() const { return PerturbSpec{perturb_sigma, perturb_jitter}; }

  void validate() const;
};

namespace detail {

struct KeyBinding {
  std::string key;
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

inline void type_error(const std::string& key, const char* expected, const std::string& value) {
  throw std::runtime_error("config: key " + key + " expects " + expected + ", got '" + value + "'");
}

inline int to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  if (!parse_ll_strict(v, out) || out < INT_MIN || out > INT_MAX) type_error(key, "an integer", v);
  return static_cast<int>(out);
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
  long long out = 0;
  if (!parse_ll_strict(v, out) || out < 0) type_error(key, "a non-negative integer", v);
  return static_cast<std::uint64_t>(out);
}

inline double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  if (!parse_double_strict(v, out)) type_error(key, "a number", v);
  return out;
}

inline std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  if (trim(v).empty()) return out;
  for (const auto& tok : split(v, ',')) out.push_back(to_int(key, trim(tok)));
  return out;
}

inline std::string from_int_list(const std::vector<int>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(xs[i]);
  }
  return out;
}

inline const std::vector<KeyBinding>& config_keys() {
  static const std::vector<KeyBinding> keys = [] {
    std::vector<KeyBinding> k;
    const auto add = [&k](std::string key, std::function<void(TrainConfig&, const std::string&)> set,
                          std::function<std::string(const TrainConfig&)> get) {
      k.push_back(KeyBinding{std::move(key), std::move(set), std::move(get)});
    };
    add("data.kind", [](TrainConfig& c, const std::string& v) { c.data_kind = v; },
        [](const TrainConfig& c) { return c.data_kind; });
    add("data.path", [](TrainConfig& c, const std::string& v) { c.data_path = v; },
        [](const TrainConfig& c) { return c.data_path; });
    add("data.n", [](TrainConfig& c, const std::string& v) { c.data_n = to_int("data.n", v); },
        [](const TrainConfig& c) { return std::to_string(c.data_n); });
    add("data.noise", [](TrainConfig& c, const std::string& v) { c.data_noise = to_double("data.noise", v); },
        [](const TrainConfig& c) { return fmt_double(c.data_noise); });
    add("data.n_labeled", [](TrainConfig& c, const std::string& v) { c.n_labeled = to_int("data.n_labeled", v); },
        [](const TrainConfig& c) { return std::to_string(c.n_labeled); });
    add("data.blob_centers",
        [](TrainConfig& c, const std::string& v) { c.blob_centers = to_int("data.blob_centers", v); },
        [](const TrainConfig& c) { return std::to_string(c.blob_centers); });
    add("data.blob_radius",
        [](TrainConfig& c, const std::string& v) { c.blob_radius = to_double("data.blob_radius", v); },
        [](const TrainConfig& c) { return fmt_double(c.blob_radius); });
    add("data.blob_sigma", [](TrainConfig& c, const std::string& v) { c.blob_sigma = to_double("data.blob_sigma", v); },
        [](const TrainConfig& c) { return fmt_double(c.blob_sigma); });
    add("data.circle_factor",
        [](TrainConfig& c, const std::string& v) { c.circle_factor = to_double("data.circle_factor", v); },
        [](const TrainConfig& c) { return fmt_double(c.circle_factor); });
    add("model.feature_layers",
        [](TrainConfig& c, const std::string& v) { c.feature_layers = to_int_list("model.feature_layers", v); },
        [](const TrainConfig& c) { return from_int_list(c.feature_layers); });
    add("model.latent_dim", [](TrainConfig& c, const std::string& v) { c.latent_dim = to_int("model.latent_dim", v); },
        [](const TrainConfig& c) { return std::to_string(c.latent_dim); });
    add("model.head_layers",
        [](TrainConfig& c, const std::string& v) { c.head_layers = to_int_list("model.head_layers", v); },
        [](const TrainConfig& c) { return from_int_list(c.head_layers); });
    add("graph.epsilon", [](TrainConfig& c, const std::string& v) { c.graph_epsilon = to_double("graph.epsilon", v); },
        [](const TrainConfig& c) { return fmt_double(c.graph_epsilon); });
    add("graph.epsilon_scale",
        [](TrainConfig& c, const std::string& v) { c.graph_epsilon_scale = to_double("graph.epsilon_scale", v); },
        [](const TrainConfig& c) { return fmt_double(c.graph_epsilon_scale); });
    add("loss.lambda1", [](TrainConfig& c, const std::string& v) { c.lambda1 = to_double("loss.lambda1", v); },
        [](const TrainConfig& c) { return fmt_double(c.lambda1); });
    add("loss.lambda2", [](TrainConfig& c, const std::string& v) { c.lambda2 = to_double("loss.lambda2", v); },
        [](const TrainConfig& c) { return fmt_double(c.lambda2); });
    add("schedule.cons_rampup_epochs",
        [](TrainConfig& c, const std::string& v) { c.cons_rampup_epochs = to_int("schedule.cons_rampup_epochs", v); },
        [](const TrainConfig& c) { return std::to_string(c.cons_rampup_epochs); });
    add("schedule.mt_epochs",
        [](TrainConfig& c, const std::string& v) { c.mt_epochs = to_int("schedule.mt_epochs", v); },
        [](const TrainConfig& c) { return std::to_string(c.mt_epochs); });
    add("schedule.lc_rampup_epochs",
        [](TrainConfig& c, const std::string& v) { c.lc_rampup_epochs = to_int("schedule.lc_rampup_epochs", v); },
        [](const TrainConfig& c) { return std::to_string(c.lc_rampup_epochs); });
    add("schedule.total_epochs",
        [](TrainConfig& c, const std::string& v) { c.total_epochs = to_int("schedule.total_epochs", v); },
        [](const TrainConfig& c) { return std::to_string(c.total_epochs); });
    add("schedule.lr", [](TrainConfig& c, const std::string& v) { c.lr = to_double("schedule.lr", v); },
        [](const TrainConfig& c) { return fmt_double(c.lr); });
    add("schedule.lr_decay_start",
        [](TrainConfig& c, const std::string& v) { c.lr_decay_start = to_int("schedule.lr_decay_start", v); },
        [](const TrainConfig& c) { return std::to_string(c.lr_decay_start); });
    add("schedule.lr_decay_epochs",
        [](TrainConfig& c, const std::string& v) { c.lr_decay_epochs = to_int("schedule.lr_decay_epochs", v); },
        [](const TrainConfig& c) { return std::to_string(c.lr_decay_epochs); });
    add("batch.labeled", [](TrainConfig& c, const std::string& v) { c.batch_labeled = to_int("batch.labeled", v); },
        [](const TrainConfig& c) { return std::to_string(c.batch_labeled); });
    add("batch.unlabeled",
        [](TrainConfig& c, const std::string& v) { c.batch_unlabeled = to_int("batch.unlabeled", v); },
        [](const TrainConfig& c) { return std::to_string(c.batch_unlabeled); });
    add("perturb.sigma", [](TrainConfig& c, const std::string& v) { c.perturb_sigma = to_double("perturb.sigma", v); },
        [](const TrainConfig& c) { return fmt_double(c.perturb_sigma); });
    add("perturb.jitter",
        [](TrainConfig& c, const std::string& v) { c.perturb_jitter = to_double("perturb.jitter", v); },
        [](const TrainConfig& c) { return fmt_double(c.perturb_jitter); });
    add("ema.alpha", [](TrainConfig& c, const std::string& v) { c.ema_alpha = to_double("ema.alpha", v); },
        [](const TrainConfig& c) { return fmt_double(c.ema_alpha); });
    add("optim.momentum", [](TrainConfig& c, const std::string& v) { c.momentum = to_double("optim.momentum", v); },
        [](const TrainConfig& c) { return fmt_double(c.momentum); });
    add("trainer.seed", [](TrainConfig& c, const std::string& v) { c.seed = to_u64("trainer.seed", v); },
        [](const TrainConfig& c) { return std::to_string(c.seed); });
    add("trainer.eval_every",
        [](TrainConfig& c, const std::string& v) { c.eval_every = to_int("trainer.eval_every", v); },
        [](const TrainConfig& c) { return std::to_string(c.eval_every); });
    add("trainer.checkpoint_every",
        [](TrainConfig& c, const std::string& v) { c.checkpoint_every = to_int("trainer.checkpoint_every", v); },
        [](const TrainConfig& c) { return std::to_string(c.checkpoint_every); });
    add("trainer.collapse_tau",
        [](TrainConfig& c, const std::string& v) { c.collapse_tau = to_double("trainer.collapse_tau", v); },
        [](const TrainConfig& c) { return fmt_double(c.collapse_tau); });
    return k;
  }();
  return keys;
}

inline const KeyBinding& find_key(const std::string& key) {
  for (const auto& b : config_keys())
    if (b.key == key) return b;
  throw std::runtime_error("config: unknown key " + key);
}

}  // namespace detail

inline void TrainConfig::validate() const {
  const auto fail = [](const std::string& key, const std::string& why) {
    throw std::runtime_error("config: " + key + " " + why);
  };
  static const std::set<std::string> kinds{"two_moons", "blobs", "circles", "csv"};
  if (data_kind.empty()) fail("data.kind", "is required");
  if (!kinds.count(data_kind)) fail("data.kind", "must be one of two_moons, blobs, circles, csv");
  if (data_kind == "csv" && data_path.empty()) fail("data.path", "is required when data.kind = csv");
  if (data_kind != "csv" && data_n < 2) fail("data.n", "must be >= 2");
  if (data_noise < 0.0) fail("data.noise", "must be >= 0");
  if (n_labeled < 1) fail("data.n_labeled", "must be >= 1");
  if (data_kind == "blobs") {
    if (blob_centers < 2) fail("data.blob_centers", "must be >= 2");
    if (blob_radius <= 0.0) fail("data.blob_radius", "must be > 0");
    if (blob_sigma < 0.0) fail("data.blob_sigma", "must be >= 0");
  }
  if (data_kind == "circles" && (circle_factor <= 0.0 || circle_factor >= 1.0))
    fail("data.circle_factor", "must lie in (0, 1)");
  for (int w : feature_layers)
    if (w < 1) fail("model.feature_layers", "widths must be >= 1");
  for (int w : head_layers)
    if (w < 1) fail("model.head_layers", "widths must be >= 1");
  if (latent_dim < 1) fail("model.latent_dim", "must be >= 1");
  if (graph_epsilon_scale <= 0.0) fail("graph.epsilon_scale", "must be > 0");
  if (lambda1 < 0.0) fail("loss.lambda1", "must be >= 0");
  if (lambda2 < 0.0) fail("loss.lambda2", "must be >= 0");
  if (cons_rampup_epochs < 1) fail("schedule.cons_rampup_epochs", "must be >= 1");
  if (mt_epochs < 0) fail("schedule.mt_epochs", "must be >= 0");
  if (lc_rampup_epochs < 1) fail("schedule.lc_rampup_epochs", "must be >= 1");
  if (total_epochs < 1) fail("schedule.total_epochs", "must be >= 1");
  if (lr <= 0.0) fail("schedule.lr", "must be > 0");
  if (lr_decay_start < 0) fail("schedule.lr_decay_start", "must be >= 0");
  if (lr_decay_epochs < 1) fail("schedule.lr_decay_epochs", "must be >= 1");
  if (batch_labeled < 1) fail("batch.labeled", "must be >= 1");
  if (batch_unlabeled < 1) fail("batch.unlabeled", "must be >= 1");
  if (perturb_sigma < 0.0) fail("perturb.sigma", "must be >= 0");
  if (perturb_jitter < 0.0) fail("perturb.jitter", "must be >= 0");
  if (ema_alpha < 0.0 || ema_alpha > 1.0) fail("ema.alpha", "must lie in [0, 1]");
  if (momentum < 0.0 || momentum >= 1.0) fail("optim.momentum", "must lie in [0, 1)");
  if (eval_every < 1) fail("trainer.eval_every", "must be >= 1");
  if (checkpoint_every < 1) fail("trainer.checkpoint_every", "must be >= 1");
}

// Grammar: one `key = value` per line; '#' starts a comment; blank lines are
// skipped. Absent keys keep their defaults; unknown and duplicate keys are
// hard errors. Does not validate ranges — callers validate after overrides.
inline TrainConfig parse_config_text(const std::string& text) {
  TrainConfig cfg;
  std::istringstream is(text);
  std::string line;
  std::set<std::string> seen;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: line " + std::to_string(lineno) + " is not of the form key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (!seen.insert(key).second) throw std::runtime_error("config: duplicate key " + key);
    detail::find_key(key).set(cfg, value);
  }
  return cfg;
}

inline TrainConfig parse_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str());
}

// Applies `key=value` pairs through the same key table as the parser, so
// unknown keys and type mismatches fail identically.
inline void apply_overrides(TrainConfig& cfg, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const std::size_t eq = o.find('=');
    if (eq == std::string::npos) throw std::runtime_error("config: override '" + o + "' is not of the form key=value");
    const std::string key = trim(o.substr(0, eq));
    const std::string value = trim(o.substr(eq + 1));
    detail::find_key(key).set(cfg, value);
  }
}

// Full defaulted view in key-table order; the checkpoint echo uses this.
inline std::string render_config(const TrainConfig& cfg) {
  std::string out;
  for (const auto& b : detail::config_keys()) {
    out += b.key;
    out += " = ";
    out += b.get(cfg);
    out += '\n';
  }
  return out;
}

inline bool same_config(const TrainConfig& a, const TrainConfig& b) { return render_config(a) == render_config(b); }

// FNV-1a of the canonical rendering; used to name run directories.
inline std::uint64_t config_hash(const TrainConfig& cfg) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : render_config(cfg)) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// One metrics row, written at the evaluation cadence.
struct EpochMetrics {
  int epoch = 0;
  double student_error = 0.0;
  double teacher_error = 0.0;
  double ce = 0.0;
  double cons = 0.0;
  double lc = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double lr = 0.0;
  double feature_variance = 0.0;
  bool collapse_flag = false;
};

}  // namespace lcmt
