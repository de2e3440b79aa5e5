#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "icc/common.hpp"
#include "icc/reduce.hpp"
#include "icc/structure.hpp"

namespace icc::surrogate {

/// Box for the unknown parameter vector theta = [sigma_y, A, n, a] (MPa,
/// MPa, -, -).
struct ParameterBounds {
  Vector lower{4}, upper{4};

  static ParameterBounds defaults();
  void validate() const;
  int dim() const { return static_cast<int>(lower.size()); }
  Vector normalize(const Vector& theta) const;
  Vector denormalize(const Vector& z) const;
  bool contains(const Vector& theta) const;
};

/// First `count` Halton points (bases 2, 3, 5, 7), affinely scaled into the
/// bounds. `skip` offsets the start index; held-out designs continue the
/// same sequence.
Matrix halton_samples(int count, const ParameterBounds& bounds, int skip = 0);
Matrix halton_unit(int count, int dim, int skip = 0);

struct GpSettings {
  int starts = 8;             // multi-start count over log-lengthscale space
  int screen_iterations = 1;  // optimizer budget per start
  int polish_iterations = 14;  // extra budget for the best starts
  int polish_count = 1;
  double nugget_floor = 1e-10;
  double nugget_max = 1e-4;
  std::uint64_t seed = 0;
};

/// Gaussian process with an anisotropic squared exponential kernel on
/// normalized inputs and standardized targets. Prediction uses the mean.
class GpModel {
 public:
  Matrix inputs;       // u x D, in [0,1]^D
  Vector targets;      // length u, standardized
  Vector log_length;   // per-dimension lengthscales (log)
  double log_sf2 = 0;  // signal variance (log)
  double log_sn2 = 0;  // nugget variance (log)
  double target_mean = 0;
  double target_scale = 1;
  Vector alpha;  // K^-1 targets

  static GpModel train(const Matrix& inputs, const Vector& targets,
                       const GpSettings& settings);

  double predict_mean(const Vector& x) const;
  Vector predict_mean(const Matrix& xs) const;
  /// Latent predictive variance (de-standardized); rebuilds the kernel
  /// factorization on first use.
  double predict_variance(const Vector& x) const;

 private:
  mutable std::shared_ptr<Matrix> chol_;  // cached kernel factorization
  const Matrix& cholesky() const;
};

/// One tree node's reduced-space models: a PCA basis per displacement
/// component and a GP per (QoI, component, channel).
struct NodeModels {
  reduce::PcaBasis basis_x, basis_y;
  std::vector<GpModel> disp_x, disp_y;  // p score channels each
  GpModel load_x, load_y;
};

class SurrogateBank {
 public:
  ParameterBounds bounds;
  int p = 5;
  int train_count = 0;
  int tree_depth = 0;
  char first_step = 'A';
  std::uint64_t seed = 0;
  std::string config_hash;
  std::map<std::string, NodeModels> nodes;

  bool has_node(const std::string& id) const { return nodes.count(id) > 0; }
  const NodeModels& node(const std::string& id) const;

  reduce::ReducedObservation predict(const std::string& node_id, const Vector& theta) const;
  /// Rows: queries; columns: [scores_x(p), scores_y(p), load_x, load_y].
  Matrix predict_batch(const std::string& node_id, const Matrix& thetas) const;

  /// Count of predictions requested outside the training bounds.
  long extrapolation_count() const;

  void save(const std::string& dir) const;
  static SurrogateBank load(const std::string& dir);
};

/// Held-out accuracy per channel, the error budget behind ignoring
/// surrogate uncertainty.
struct HeldOutError {
  std::string node_id, qoi, component;
  int channel = -1;
  double mae = 0;            // over the held-out points
  double target_range = 0;   // over the training targets
  double noise_std = 0;      // observation noise std for this channel
  double mean_pred_std = 0;  // mean GP predictive std over held-out points
};

struct BankBuildSettings {
  ParameterBounds bounds = ParameterBounds::defaults();
  int sample_count = 400;
  int held_out_count = 20;
  int p = 5;
  int tree_depth = 5;
  char first_step = 'A';
  std::uint64_t seed = 0;
  std::string config_hash;
  GpSettings gp;
  structure::PathSolver::Settings solver;
  double psi2_disp = 4e-6;    // for the held-out error budget report
  double psi2_load = 582.11;
  int threads = 0;
  std::optional<double> variance_threshold;  // retain-p-by-variance mode
  /// When set, trained channels with a matching config hash are reused.
  std::string resume_dir;
};

struct BankBuildResult {
  SurrogateBank bank;
  std::vector<HeldOutError> held_out;
  /// Raw training/held-out observations per node (for the PCA acceptance
  /// checks and error reports).
  std::map<std::string, std::vector<structure::FieldObservation>> training;
  std::map<std::string, std::vector<structure::FieldObservation>> held_out_obs;
  Matrix theta_train, theta_held_out;
};

/// Sample the forward model over the load-path subtree (each tree node's
/// solve runs once per sample), fit per-node PCA bases and per-channel GPs.
BankBuildResult build_bank(const structure::CruciformMesh& mesh,
                           const material::MaterialParams& fixed_elastic,
                           const BankBuildSettings& settings);

}  // namespace icc::surrogate
