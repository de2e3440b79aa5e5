#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <string>

#include "icc/boed.hpp"
#include "icc/infer.hpp"
#include "icc/material.hpp"
#include "icc/structure.hpp"
#include "icc/surrogate.hpp"

namespace icc::config {

/// One artifact of record per run: every knob the pipeline consumes. The
/// canonical JSON dump is hashed into all output manifests.
struct RunConfig {
  structure::CruciformGeometry geometry;
  int mesh_refinement = 0;

  material::MaterialParams truth_params;  // synthetic-data generator
  structure::NoiseSpec noise;

  surrogate::ParameterBounds bounds = surrogate::ParameterBounds::defaults();
  infer::PriorSpec prior = infer::PriorSpec::defaults();

  int tree_depth = 5;
  double increment = 0.25;
  char first_step = 'A';

  int pca_p = 5;
  std::optional<double> pca_variance_threshold;

  int surrogate_samples = 400;
  int held_out_count = 20;
  surrogate::GpSettings gp;

  // Desk budgets; --paper-budgets switches to the published ones.
  int eig_n = 2000, eig_m = 500;
  int eig_n_paper = 10000, eig_m_paper = 1000;
  double eig_underflow_gap = 700.0;
  int mcmc_samples = 30000, mcmc_burn_in = 5000, mcmc_thin = 5;
  int mcmc_samples_paper = 120000, mcmc_burn_in_paper = 20000, mcmc_thin_paper = 10;
  bool paper_budgets = false;

  int predictive_draws = 200;
  std::uint64_t seed = 20240709;
  int threads = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  std::string hash() const;

  boed::EigSettings eig_settings() const;
  infer::McmcSettings mcmc_settings() const;
  surrogate::BankBuildSettings bank_settings() const;
};

RunConfig load_config(const std::string& file);

}  // namespace icc::config
