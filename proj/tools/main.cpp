// Command-line front end: train / eval / sweep / gen-data / export-features.

#include <CLI11.hpp>

#include "lcmt/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"semi-supervised trainer: student/teacher consistency with a latent clustering regularizer"};
  app.require_subcommand(1);

  lcmt::cli::TrainOptions train_opts;
  auto* train = app.add_subcommand("train", "train a model from a config");
  train->add_option("--config", train_opts.config_path, "config file (key = value lines)");
  train->add_option("--set", train_opts.overrides, "override, key=value (repeatable)");
  train->add_option("--out", train_opts.out_dir, "run directory (default: runs/<config-hash>-s<seed>)");
  train->add_option("--resume", train_opts.resume_path, "checkpoint to continue from");

  lcmt::cli::EvalOptions eval_opts;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", eval_opts.checkpoint_path, "checkpoint file")->required();
  eval->add_option("--data", eval_opts.data_csv, "CSV dataset (default: rebuild from the config echo)");

  lcmt::cli::SweepOptions sweep_opts;
  auto* sweep = app.add_subcommand("sweep", "grid over one parameter x seeds");
  sweep->add_option("--config", sweep_opts.config_path, "base config file")->required();
  sweep->add_option("--set", sweep_opts.overrides, "override applied to every run (repeatable)");
  sweep->add_option("--param", sweep_opts.param, "graph.epsilon | loss.lambda2 | ema.alpha")->required();
  sweep->add_option("--values", sweep_opts.values, "comma-separated values")->required()->delimiter(',');
  sweep->add_option("--seeds", sweep_opts.seeds, "comma-separated seeds")->required()->delimiter(',');
  sweep->add_option("--out", sweep_opts.out_dir, "output directory (default: sweep)");
  sweep->add_option("--parallel", sweep_opts.parallel, "worker threads (default: 1)");

  lcmt::cli::GenDataOptions gen_opts;
  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset to CSV");
  gen->add_option("--kind", gen_opts.kind, "two_moons | blobs | circles");
  gen->add_option("--n", gen_opts.n, "sample count");
  gen->add_option("--noise", gen_opts.noise, "noise level (two_moons, circles)");
  gen->add_option("--blob-centers", gen_opts.blob_centers, "cluster count (blobs)");
  gen->add_option("--blob-radius", gen_opts.blob_radius, "ring radius of the centers (blobs)");
  gen->add_option("--blob-sigma", gen_opts.blob_sigma, "cluster spread (blobs)");
  gen->add_option("--circle-factor", gen_opts.circle_factor, "inner radius fraction (circles)");
  gen->add_option("--seed", gen_opts.seed, "generator seed");
  gen->add_option("--out", gen_opts.out, "output CSV path")->required();

  lcmt::cli::ExportOptions export_opts;
  auto* exp = app.add_subcommand("export-features", "dump latent features for plotting");
  exp->add_option("--checkpoint", export_opts.checkpoint_path, "checkpoint file")->required();
  exp->add_option("--data", export_opts.data_csv, "CSV dataset (default: rebuild from the config echo)");
  exp->add_option("--out", export_opts.out, "output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // exit codes are a three-value contract: 0 ok, 1 error, 2 collapse halt
    return app.exit(e) == 0 ? 0 : 1;
  }

  if (train->parsed()) return lcmt::cli::cmd_train(train_opts);
  if (eval->parsed()) return lcmt::cli::cmd_eval(eval_opts);
  if (sweep->parsed()) return lcmt::cli::cmd_sweep(sweep_opts);
  if (gen->parsed()) return lcmt::cli::cmd_gen_data(gen_opts);
  if (exp->parsed()) return lcmt::cli::cmd_export_features(export_opts);
  return 1;
}
