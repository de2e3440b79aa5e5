#include "icc/config.hpp"

#include <fstream>

#include "icc/jsonio.hpp"

namespace icc {

namespace {
int g_default_threads = 0;
}

int default_threads() {
  if (g_default_threads > 0) return g_default_threads;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

void set_default_threads(int n) { g_default_threads = n; }

}  // namespace icc

namespace icc::config {

using jsonio::json;

void RunConfig::validate() const {
  geometry.validate();
  truth_params.validate();
  bounds.validate();
  prior.validate();
  if (!(noise.psi2_disp > 0 && noise.psi2_load > 0))
    throw std::invalid_argument("config: noise variances must be positive");
  if (tree_depth < 1) throw std::invalid_argument("config: tree depth");
  if (!(increment > 0)) throw std::invalid_argument("config: increment");
  if (first_step != 'A' && first_step != 'B')
    throw std::invalid_argument("config: first step must be A or B");
  if (pca_p < 1) throw std::invalid_argument("config: pca p");
  if (surrogate_samples < pca_p + 2) throw std::invalid_argument("config: sample count");
  if (eig_n < 1 || eig_m < 1) throw std::invalid_argument("config: EIG budgets");
  if (mcmc_samples <= mcmc_burn_in) throw std::invalid_argument("config: MCMC budgets");
  if (predictive_draws < 20) throw std::invalid_argument("config: predictive draws");
}

json RunConfig::to_json() const {
  json j;
  j["geometry"] = {{"arm_half_width", geometry.arm_half_width},
                   {"arm_length", geometry.arm_length},
                   {"fillet_radius", geometry.fillet_radius},
                   {"thickness_arm", geometry.thickness_arm},
                   {"thickness_gauge", geometry.thickness_gauge},
                   {"gauge_radius", geometry.gauge_radius},
                   {"center_divisions", geometry.center_divisions},
                   {"fillet_divisions", geometry.fillet_divisions},
                   {"outer_divisions", geometry.outer_divisions},
                   {"outer_grading", geometry.outer_grading},
                   {"refinement", mesh_refinement}};
  j["truth_params"] = {{"E", truth_params.E},       {"nu", truth_params.nu},
                       {"sigma_y", truth_params.sigma_y}, {"A", truth_params.A},
                       {"n", truth_params.n},       {"a", truth_params.a}};
  j["noise"] = {{"psi2_disp", noise.psi2_disp}, {"psi2_load", noise.psi2_load}};
  j["bounds"] = {{"lower", jsonio::from_vector(bounds.lower)},
                 {"upper", jsonio::from_vector(bounds.upper)}};
  j["prior"] = {{"mu", jsonio::from_vector(prior.mu)},
                {"delta2", jsonio::from_vector(prior.delta2)},
                {"lb", jsonio::from_vector(prior.lb)},
                {"ub", jsonio::from_vector(prior.ub)}};
  j["tree"] = {{"depth", tree_depth},
               {"increment", increment},
               {"first_step", std::string(1, first_step)}};
  j["pca"] = {{"p", pca_p}};
  if (pca_variance_threshold) j["pca"]["variance_threshold"] = *pca_variance_threshold;
  j["surrogate"] = {{"samples", surrogate_samples},
                    {"held_out", held_out_count},
                    {"gp_starts", gp.starts},
                    {"gp_screen_iterations", gp.screen_iterations},
                    {"gp_polish_iterations", gp.polish_iterations},
                    {"gp_polish_count", gp.polish_count}};
  j["eig"] = {{"n", eig_n},
              {"m", eig_m},
              {"n_paper", eig_n_paper},
              {"m_paper", eig_m_paper},
              {"underflow_gap", eig_underflow_gap}};
  j["mcmc"] = {{"samples", mcmc_samples},
               {"burn_in", mcmc_burn_in},
               {"thin", mcmc_thin},
               {"samples_paper", mcmc_samples_paper},
               {"burn_in_paper", mcmc_burn_in_paper},
               {"thin_paper", mcmc_thin_paper}};
  j["predictive_draws"] = predictive_draws;
  j["seed"] = seed;
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  if (j.contains("geometry")) {
    const auto& g = j["geometry"];
    auto& m = c.geometry;
    m.arm_half_width = g.value("arm_half_width", m.arm_half_width);
    m.arm_length = g.value("arm_length", m.arm_length);
    m.fillet_radius = g.value("fillet_radius", m.fillet_radius);
    m.thickness_arm = g.value("thickness_arm", m.thickness_arm);
    m.thickness_gauge = g.value("thickness_gauge", m.thickness_gauge);
    m.gauge_radius = g.value("gauge_radius", m.gauge_radius);
    m.center_divisions = g.value("center_divisions", m.center_divisions);
    m.fillet_divisions = g.value("fillet_divisions", m.fillet_divisions);
    m.outer_divisions = g.value("outer_divisions", m.outer_divisions);
    m.outer_grading = g.value("outer_grading", m.outer_grading);
    c.mesh_refinement = g.value("refinement", c.mesh_refinement);
  }
  if (j.contains("truth_params")) {
    const auto& t = j["truth_params"];
    c.truth_params.E = t.value("E", c.truth_params.E);
    c.truth_params.nu = t.value("nu", c.truth_params.nu);
    c.truth_params.sigma_y = t.value("sigma_y", c.truth_params.sigma_y);
    c.truth_params.A = t.value("A", c.truth_params.A);
    c.truth_params.n = t.value("n", c.truth_params.n);
    c.truth_params.a = t.value("a", c.truth_params.a);
  }
  if (j.contains("noise")) {
    c.noise.psi2_disp = j["noise"].value("psi2_disp", c.noise.psi2_disp);
    c.noise.psi2_load = j["noise"].value("psi2_load", c.noise.psi2_load);
  }
  if (j.contains("bounds")) {
    c.bounds.lower = jsonio::to_vector(j["bounds"]["lower"]);
    c.bounds.upper = jsonio::to_vector(j["bounds"]["upper"]);
  }
  if (j.contains("prior")) {
    c.prior.mu = jsonio::to_vector(j["prior"]["mu"]);
    c.prior.delta2 = jsonio::to_vector(j["prior"]["delta2"]);
    c.prior.lb = jsonio::to_vector(j["prior"]["lb"]);
    c.prior.ub = jsonio::to_vector(j["prior"]["ub"]);
  }
  if (j.contains("tree")) {
    c.tree_depth = j["tree"].value("depth", c.tree_depth);
    c.increment = j["tree"].value("increment", c.increment);
    const std::string f = j["tree"].value("first_step", std::string(1, c.first_step));
    c.first_step = f.empty() ? 'A' : f[0];
  }
  if (j.contains("pca")) {
    c.pca_p = j["pca"].value("p", c.pca_p);
    if (j["pca"].contains("variance_threshold"))
      c.pca_variance_threshold = j["pca"]["variance_threshold"].get<double>();
  }
  if (j.contains("surrogate")) {
    const auto& s = j["surrogate"];
    c.surrogate_samples = s.value("samples", c.surrogate_samples);
    c.held_out_count = s.value("held_out", c.held_out_count);
    c.gp.starts = s.value("gp_starts", c.gp.starts);
    c.gp.screen_iterations = s.value("gp_screen_iterations", c.gp.screen_iterations);
    c.gp.polish_iterations = s.value("gp_polish_iterations", c.gp.polish_iterations);
    c.gp.polish_count = s.value("gp_polish_count", c.gp.polish_count);
  }
  if (j.contains("eig")) {
    const auto& e = j["eig"];
    c.eig_n = e.value("n", c.eig_n);
    c.eig_m = e.value("m", c.eig_m);
    c.eig_n_paper = e.value("n_paper", c.eig_n_paper);
    c.eig_m_paper = e.value("m_paper", c.eig_m_paper);
    c.eig_underflow_gap = e.value("underflow_gap", c.eig_underflow_gap);
  }
  if (j.contains("mcmc")) {
    const auto& m = j["mcmc"];
    c.mcmc_samples = m.value("samples", c.mcmc_samples);
    c.mcmc_burn_in = m.value("burn_in", c.mcmc_burn_in);
    c.mcmc_thin = m.value("thin", c.mcmc_thin);
    c.mcmc_samples_paper = m.value("samples_paper", c.mcmc_samples_paper);
    c.mcmc_burn_in_paper = m.value("burn_in_paper", c.mcmc_burn_in_paper);
    c.mcmc_thin_paper = m.value("thin_paper", c.mcmc_thin_paper);
  }
  c.predictive_draws = j.value("predictive_draws", c.predictive_draws);
  c.seed = j.value("seed", c.seed);
  return c;
}

std::string RunConfig::hash() const {
  const std::string dump = to_json().dump();
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(hash_str(dump)));
  return buf;
}

boed::EigSettings RunConfig::eig_settings() const {
  boed::EigSettings s;
  s.n_outer = paper_budgets ? eig_n_paper : eig_n;
  s.m_inner = paper_budgets ? eig_m_paper : eig_m;
  s.underflow_gap = eig_underflow_gap;
  s.seed = seed;
  s.threads = threads;
  return s;
}

infer::McmcSettings RunConfig::mcmc_settings() const {
  infer::McmcSettings s;
  s.samples = paper_budgets ? mcmc_samples_paper : mcmc_samples;
  s.burn_in = paper_budgets ? mcmc_burn_in_paper : mcmc_burn_in;
  s.thin = paper_budgets ? mcmc_thin_paper : mcmc_thin;
  s.seed = seed;
  return s;
}

surrogate::BankBuildSettings RunConfig::bank_settings() const {
  surrogate::BankBuildSettings s;
  s.bounds = bounds;
  s.sample_count = surrogate_samples;
  s.held_out_count = held_out_count;
  s.p = pca_p;
  s.tree_depth = tree_depth;
  s.first_step = first_step;
  s.seed = seed;
  s.config_hash = hash();
  s.gp = gp;
  s.gp.seed = seed;
  s.solver.increment = increment;
  s.psi2_disp = noise.psi2_disp;
  s.psi2_load = noise.psi2_load;
  s.threads = threads;
  s.variance_threshold = pca_variance_threshold;
  return s;
}

RunConfig load_config(const std::string& file) {
  std::ifstream f(file);
  if (!f) throw std::runtime_error("cannot read config " + file);
  return RunConfig::from_json(json::parse(f));
}

}  // namespace icc::config
