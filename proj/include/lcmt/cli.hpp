#pragma once
// Subcommand implementations behind the command-line tool. Exit codes:
// 0 success, 1 error, 2 training halted by the collapse detector.

#include <atomic>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "lcmt/trainer.hpp"

namespace lcmt::cli {

inline TrainConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  TrainConfig cfg = parse_config(path);
  apply_overrides(cfg, overrides);
  cfg.validate();
  return cfg;
}

struct TrainOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::string resume_path;
};

inline int cmd_train(const TrainOptions& o) {
  try {
    TrainConfig cfg;
    Checkpoint ckpt;
    const bool resuming = !o.resume_path.empty();
    if (resuming) {
      if (!o.config_path.empty() || !o.overrides.empty())
        throw std::runtime_error("train: --resume continues the checkpoint's own config; drop --config/--set");
      ckpt = load_checkpoint(o.resume_path);
      cfg = parse_config_text(ckpt.config_text);
      cfg.validate();
    } else {
      if (o.config_path.empty()) throw std::runtime_error("train: --config is required");
      cfg = load_config(o.config_path, o.overrides);
    }
    const Dataset ds = make_dataset(cfg);
    const std::string out = o.out_dir.empty() ? default_run_dir("runs", cfg) : o.out_dir;
    const RunResult r = run_training(cfg, ds, out, resuming ? &ckpt : nullptr);
    if (r.collapsed)
      std::cout << "collapse detected at epoch " << r.last_epoch << " (feature variance below "
                << fmt_double(r.resolved_tau) << ")\n";
    std::cout << "student_err=" << fmt_double(r.final_student_error)
              << " teacher_err=" << fmt_double(r.final_teacher_error) << "\n";
    return r.collapsed ? 2 : 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

struct EvalOptions {
  std::string checkpoint_path;
  std::string data_csv;  // optional; defaults to the dataset the config echo describes
};

inline int cmd_eval(const EvalOptions& o) {
  try {
    const Checkpoint ckpt = load_checkpoint(o.checkpoint_path);
    TrainConfig cfg = parse_config_text(ckpt.config_text);
    cfg.validate();
    const Dataset ds = o.data_csv.empty() ? make_dataset(cfg) : load_csv(o.data_csv);
    const MlpSpec spec = cfg.mlp_spec(ds.feature_dim(), ds.class_count);
    const Params student = params_from_checkpoint(ckpt, spec, "student");
    const Params teacher = params_from_checkpoint(ckpt, spec, "teacher");
    char line[80];
    std::snprintf(line, sizeof(line), "student_err=%.4f teacher_err=%.4f", evaluate(student, ds),
                  evaluate(teacher, ds));
    std::cout << line << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

struct SweepOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string param;
  std::vector<double> values;
  std::vector<std::uint64_t> seeds;
  std::string out_dir = "sweep";
  int parallel = 1;
};

struct SweepRow {
  double value = 0.0;
  int runs = 0;
  int collapsed = 0;
  double mean = 0.0;  // over final teacher error, all runs of the value
  double stddev = 0.0;
};

// Runs the grid and aggregates the final teacher error per value. Used by
// cmd_sweep and directly by tests.
inline std::vector<SweepRow> run_sweep(const TrainConfig& base, const std::string& param,
                                       const std::vector<double>& values, const std::vector<std::uint64_t>& seeds,
                                       const std::string& out_dir, int parallel) {
  static const std::vector<std::string> sweepable{"graph.epsilon", "loss.lambda2", "ema.alpha"};
  if (std::find(sweepable.begin(), sweepable.end(), param) == sweepable.end())
    throw std::runtime_error("sweep: parameter must be one of graph.epsilon, loss.lambda2, ema.alpha");
  if (values.empty()) throw std::runtime_error("sweep: need at least one value");
  if (seeds.empty()) throw std::runtime_error("sweep: need at least one seed");
  if (parallel < 1) throw std::runtime_error("sweep: --parallel must be >= 1");

  struct Job {
    TrainConfig cfg;
    std::size_t value_idx = 0;
  };
  std::vector<Job> jobs;
  for (std::size_t vi = 0; vi < values.size(); ++vi)
    for (const std::uint64_t s : seeds) {
      TrainConfig cfg = base;
      apply_overrides(cfg, {param + "=" + fmt_double(values[vi]), "trainer.seed=" + std::to_string(s)});
      cfg.validate();
      jobs.push_back(Job{std::move(cfg), vi});
    }

  struct Outcome {
    bool collapsed = false;
    double teacher_error = 0.0;
    std::string error;
  };
  std::vector<Outcome> outcomes(jobs.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        const Dataset ds = make_dataset(jobs[i].cfg);
        const RunResult r = run_training(jobs[i].cfg, ds, default_run_dir(out_dir, jobs[i].cfg));
        outcomes[i].collapsed = r.collapsed;
        outcomes[i].teacher_error = r.final_teacher_error;
      } catch (const std::exception& e) {
        outcomes[i].error = e.what();
      }
    }
  };
  const int threads = std::min<int>(parallel, static_cast<int>(jobs.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& oc : outcomes)
    if (!oc.error.empty()) throw std::runtime_error("sweep: run failed: " + oc.error);

  std::vector<SweepRow> rows;
  for (std::size_t vi = 0; vi < values.size(); ++vi) {
    SweepRow row;
    row.value = values[vi];
    std::vector<double> errs;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (jobs[i].value_idx != vi) continue;
      row.runs += 1;
      if (outcomes[i].collapsed)
        row.collapsed += 1;
      else
        errs.push_back(outcomes[i].teacher_error);
    }
    if (row.collapsed == 0 && !errs.empty()) {
      double mean = 0.0;
      for (double e : errs) mean += e;
      mean /= static_cast<double>(errs.size());
      double var = 0.0;
      for (double e : errs) var += (e - mean) * (e - mean);
      row.mean = mean;
      row.stddev = errs.size() > 1 ? std::sqrt(var / static_cast<double>(errs.size() - 1)) : 0.0;
    }
    rows.push_back(row);
  }
  return rows;
}

inline int cmd_sweep(const SweepOptions& o) {
  try {
    if (o.config_path.empty()) throw std::runtime_error("sweep: --config is required");
    const TrainConfig base = load_config(o.config_path, o.overrides);
    const auto rows = run_sweep(base, o.param, o.values, o.seeds, o.out_dir, o.parallel);

    std::filesystem::create_directories(o.out_dir);
    const std::string table_path = o.out_dir + "/sweep.csv";
    std::ofstream os(table_path);
    if (!os) throw std::runtime_error("sweep: cannot open " + table_path + " for writing");
    os << "param,value,runs,collapsed,mean_teacher_error,std_teacher_error\n";
    for (const auto& r : rows) {
      os << o.param << ',' << fmt_double(r.value) << ',' << r.runs << ',' << r.collapsed << ',';
      if (r.collapsed > 0)
        os << "collapsed,collapsed\n";
      else
        os << fmt_double(r.mean) << ',' << fmt_double(r.stddev) << '\n';
    }
    if (!os) throw std::runtime_error("sweep: write failed for " + table_path);

    for (const auto& r : rows) {
      std::printf("%s=%-12g runs=%d ", o.param.c_str(), r.value, r.runs);
      if (r.collapsed > 0)
        std::printf("collapsed (%d/%d runs)\n", r.collapsed, r.runs);
      else
        std::printf("teacher_err=%.4f +/- %.4f\n", r.mean, r.stddev);
    }
    std::cout << "wrote " << table_path << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

struct GenDataOptions {
  std::string kind = "two_moons";
  int n = 1000;
  double noise = 0.1;
  int blob_centers = 3;
  double blob_radius = 3.0;
  double blob_sigma = 0.5;
  double circle_factor = 0.5;
  std::uint64_t seed = 1;
  std::string out;
};

inline int cmd_gen_data(const GenDataOptions& o) {
  try {
    if (o.out.empty()) throw std::runtime_error("gen-data: --out is required");
    Dataset ds;
    if (o.kind == "two_moons")
      ds = gen_two_moons(o.n, o.noise, o.seed);
    else if (o.kind == "blobs")
      ds = gen_blobs(o.n, ring_centers(o.blob_centers, o.blob_radius), o.blob_sigma, o.seed);
    else if (o.kind == "circles")
      ds = gen_circles(o.n, o.noise, o.seed, o.circle_factor);
    else
      throw std::runtime_error("gen-data: kind must be one of two_moons, blobs, circles");
    write_dataset_csv(o.out, ds);
    std::cout << "wrote " << ds.size() << " rows to " << o.out << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

struct ExportOptions {
  std::string checkpoint_path;
  std::string data_csv;  // optional, as in eval
  std::string out;
};

inline int cmd_export_features(const ExportOptions& o) {
  try {
    if (o.out.empty()) throw std::runtime_error("export-features: --out is required");
    const Checkpoint ckpt = load_checkpoint(o.checkpoint_path);
    TrainConfig cfg = parse_config_text(ckpt.config_text);
    cfg.validate();
    const Dataset ds = o.data_csv.empty() ? make_dataset(cfg) : load_csv(o.data_csv);
    const MlpSpec spec = cfg.mlp_spec(ds.feature_dim(), ds.class_count);
    const Params student = params_from_checkpoint(ckpt, spec, "student");
    FeatureDump dump;
    dump.z = forward_features_value(student, ds.X);
    dump.label = ds.y;
    dump.labeled = ds.labeled_mask;
    dump.predicted = predict_labels(student, ds.X);
    export_features(o.out, dump);
    std::cout << "wrote " << ds.size() << " rows to " << o.out << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace lcmt::cli
