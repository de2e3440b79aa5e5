#include <CLI11.hpp>
#include <iostream>

#include "icc/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Adaptive load-path calibration of a Hosford-Voce elastoplastic "
               "model from synthetic full-field cruciform data"};
  app.require_subcommand(1);

  std::string config_file, out = "runs/default";
  long long seed = -1;
  int threads = 0;
  bool paper_budgets = false;
  app.add_option("--config", config_file, "JSON config file (defaults when omitted)");
  app.add_option("--out", out, "output directory");
  app.add_option("--seed", seed, "override the config seed");
  app.add_flag("--paper-budgets", paper_budgets,
               "use the published EIG and MCMC budgets instead of the desk ones");
  app.add_option("--threads", threads, "worker threads (0 = hardware)");

  auto* c_truth = app.add_subcommand("generate-truth", "solve all load paths under "
                                     "the true parameters and write synthetic data");
  auto* c_train = app.add_subcommand("train-surrogates", "build the PCA + GP bank");
  auto* c_icc = app.add_subcommand("run-icc", "run the adaptive feedback loop");
  auto* c_sweep = app.add_subcommand("sweep-paths", "calibrate every enumerated path");
  auto* c_cal = app.add_subcommand("calibrate-path", "calibrate one load path");
  auto* c_val = app.add_subcommand("validate", "posterior predictive validation");
  auto* c_oracle = app.add_subcommand("eig-oracle", "closed-form EIG estimator checks");

  std::string cal_path = "AAAAA";
  bool with_mcmc = false;
  c_cal->add_option("path", cal_path, "axis labels, e.g. AABAB")->required();
  c_cal->add_flag("--mcmc", with_mcmc, "also run the MCMC validation chain");

  std::string val_cal = "AAAAA", val_pred = "ABBBA";
  c_val->add_option("--calibration", val_cal, "calibration path");
  c_val->add_option("--prediction", val_pred, "held-out prediction path");

  CLI11_PARSE(app, argc, argv);

  try {
    icc::config::RunConfig cfg = config_file.empty()
                                     ? icc::config::RunConfig{}
                                     : icc::config::load_config(config_file);
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    cfg.paper_budgets = paper_budgets;
    cfg.threads = threads;
    if (threads > 0) icc::set_default_threads(threads);
    cfg.validate();

    if (c_truth->parsed()) return icc::pipeline::cmd_generate_truth(cfg, out);
    if (c_train->parsed()) return icc::pipeline::cmd_train_surrogates(cfg, out);
    if (c_icc->parsed()) return icc::pipeline::cmd_run_icc(cfg, out);
    if (c_sweep->parsed()) return icc::pipeline::cmd_sweep_paths(cfg, out);
    if (c_cal->parsed()) return icc::pipeline::cmd_calibrate_path(cfg, out, cal_path, with_mcmc);
    if (c_val->parsed()) return icc::pipeline::cmd_validate(cfg, out, val_cal, val_pred);
    if (c_oracle->parsed()) return icc::pipeline::cmd_eig_oracle(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
