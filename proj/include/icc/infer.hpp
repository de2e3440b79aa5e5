#pragma once

#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "icc/common.hpp"
#include "icc/reduce.hpp"
#include "icc/stats.hpp"
#include "icc/surrogate.hpp"

namespace icc::infer {

/// Distribution over the parameter box that EIG and evidence estimators can
/// draw from and evaluate exactly (up to a fixed normalizer).
class ParameterSampler {
 public:
  virtual ~ParameterSampler() = default;
  virtual int dim() const = 0;
  virtual Vector draw(std::mt19937_64& rng) const = 0;
  virtual double logpdf(const Vector& theta) const = 0;
  virtual const Vector& lower() const = 0;
  virtual const Vector& upper() const = 0;
};

/// Independent truncated normals per parameter, Table-3 style.
struct PriorSpec : ParameterSampler {
  Vector mu, delta2, lb, ub;

  static PriorSpec defaults();
  void validate() const;
  stats::TruncatedNormal marginal(int d) const {
    return {mu[d], std::sqrt(delta2[d]), lb[d], ub[d]};
  }

  int dim() const override { return static_cast<int>(mu.size()); }
  Vector draw(std::mt19937_64& rng) const override;
  double logpdf(const Vector& theta) const override;
  const Vector& lower() const override { return lb; }
  const Vector& upper() const override { return ub; }
};

Matrix sample_prior(const PriorSpec& prior, int count, std::uint64_t seed);

/// Observation noise in reduced space: per-node score covariances from the
/// stored PCA bases plus the scalar load variance.
class NoiseModel {
 public:
  double psi2_disp = 4e-6, psi2_load = 582.11;
  // QoI mask for single-QoI calibrations; logpdf sums only enabled blocks.
  bool use_disp = true, use_load = true;

  struct ScoreNoise {
    Matrix cov, inv, chol;
    double logdet = 0;
  };

  static NoiseModel build(const surrogate::SurrogateBank& bank, double psi2_disp,
                          double psi2_load);

  const ScoreNoise& score_noise(const std::string& node, int comp /*0=X,1=Y*/) const;

  /// Flattened layout [scores_x(p), scores_y(p), load_x, load_y].
  double logpdf(const std::string& node, const Vector& obs, const Vector& pred) const;
  Vector sample_observation(const std::string& node, const Vector& pred,
                            std::mt19937_64& rng) const;

  struct QoiTerms {
    double disp_x = 0, disp_y = 0, load_x = 0, load_y = 0;
    double total() const { return disp_x + disp_y + load_x + load_y; }
  };
  QoiTerms logpdf_terms(const std::string& node, const Vector& obs,
                        const Vector& pred) const;

  int p = 0;

 private:
  std::map<std::string, std::array<ScoreNoise, 2>> per_node_;
};

/// Laplace approximation: Gaussian at the MAP restricted to the parameter
/// box by rejection. The box normalizer is estimated once by fixed-seed
/// Monte Carlo so logpdf is a proper density.
class GaussianPosterior : public ParameterSampler {
 public:
  Vector mean;
  Matrix cov;
  Vector lb, ub;
  bool boundary_warning = false;
  bool eigenvalue_floored = false;

  GaussianPosterior() = default;
  GaussianPosterior(Vector mean, Matrix cov, Vector lb, Vector ub);

  int dim() const override { return static_cast<int>(mean.size()); }
  Vector draw(std::mt19937_64& rng) const override;
  double logpdf(const Vector& theta) const override;
  const Vector& lower() const override { return lb; }
  const Vector& upper() const override { return ub; }

  const Matrix& cholesky() const;
  double log_box_mass() const;

 private:
  mutable Matrix chol_;
  mutable double log_det_ = 0;
  mutable double log_box_mass_ = 1.0;  // >0 marks "not computed yet"
  mutable bool ready_ = false;
  void ensure() const;
};

double log_likelihood(const std::vector<reduce::ReducedObservation>& data,
                      const Vector& theta, const surrogate::SurrogateBank& bank,
                      const NoiseModel& noise);

struct MapSettings {
  int starts = 16;
  int max_iterations = 120;
  std::uint64_t seed = 0;
  std::optional<Vector> extra_start;  // e.g. the previous step's MAP
};

/// Multi-start bounded maximizer of an arbitrary log posterior (Halton
/// starts over the box plus any extras).
Vector map_maximize(const std::function<double(const Vector&)>& log_post,
                    const Vector& lb, const Vector& ub, const MapSettings& settings,
                    const std::vector<Vector>& extra_starts = {});

Vector map_estimate(const std::vector<reduce::ReducedObservation>& data,
                    const PriorSpec& prior, const surrogate::SurrogateBank& bank,
                    const NoiseModel& noise, const MapSettings& settings = {});

struct LaplaceSettings {
  double fd_step = 1e-4;  // on bound-normalized coordinates
  MapSettings map;
};

/// Generic Laplace fit around a given interior maximum of `log_post`.
GaussianPosterior laplace_fit(const std::function<double(const Vector&)>& log_post,
                              const Vector& theta_map, const Vector& lb,
                              const Vector& ub, double fd_step = 1e-4);

GaussianPosterior laplace_posterior(const std::vector<reduce::ReducedObservation>& data,
                                    const PriorSpec& prior,
                                    const surrogate::SurrogateBank& bank,
                                    const NoiseModel& noise,
                                    const LaplaceSettings& settings = {});

struct McmcSettings {
  int samples = 30000;
  int burn_in = 5000;
  int thin = 5;
  std::uint64_t seed = 0;
  std::optional<Vector> init;
  std::optional<Matrix> proposal_cov;
};

struct Chain {
  Matrix samples;  // kept draws, row per sample
  double acceptance_rate = 0;
  bool acceptance_warning = false;
};

/// Adaptive random-walk Metropolis over an arbitrary log posterior;
/// covariance adaptation runs during burn-in only.
Chain mcmc_sample(const std::function<double(const Vector&)>& log_post,
                  const Vector& lb, const Vector& ub, const McmcSettings& settings);

Chain mcmc_sample(const std::vector<reduce::ReducedObservation>& data,
                  const PriorSpec& prior, const surrogate::SurrogateBank& bank,
                  const NoiseModel& noise, const McmcSettings& settings);

struct PosteriorSummary {
  Vector mean;
  Vector variance;
  Vector ci_half_width;  // 1.96 sqrt(variance)
  double generalized_variance = 0;      // det(Sigma) by LU
  double det_from_eigenvalues = 0;      // cross-check product
  Matrix correlation;
};

PosteriorSummary summarize(const GaussianPosterior& posterior);
PosteriorSummary summarize(const Matrix& chain_samples);

}  // namespace icc::infer
