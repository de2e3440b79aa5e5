#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "icc/common.hpp"
#include "icc/infer.hpp"
#include "icc/pathtree.hpp"
#include "icc/structure.hpp"
#include "icc/surrogate.hpp"

namespace icc::boed {

/// Gaussian observation model of one candidate load step.
class StepModel {
 public:
  virtual ~StepModel() = default;
  virtual int dim() const = 0;
  virtual Matrix predict_batch(const Matrix& thetas) const = 0;  // Q x dim
  Vector predict(const Vector& theta) const {
    return predict_batch(theta.transpose()).row(0).transpose();
  }
  virtual double logpdf(const Vector& obs, const Vector& pred) const = 0;
  virtual Vector sample_observation(const Vector& pred, std::mt19937_64& rng) const = 0;
};

/// The surrogate bank's observation model at one tree node.
class BankStepModel : public StepModel {
 public:
  BankStepModel(const surrogate::SurrogateBank& bank, const infer::NoiseModel& noise,
                std::string node_id);
  int dim() const override;
  Matrix predict_batch(const Matrix& thetas) const override;
  double logpdf(const Vector& obs, const Vector& pred) const override;
  Vector sample_observation(const Vector& pred, std::mt19937_64& rng) const override;
  const std::string& node_id() const { return node_; }

 private:
  const surrogate::SurrogateBank& bank_;
  const infer::NoiseModel& noise_;
  std::string node_;
};

struct EigSettings {
  int n_outer = 10000;
  int m_inner = 1000;
  std::uint64_t seed = 0;
  double underflow_gap = 700.0;  // nats between outer and best inner loglike
  bool use_fallback = true;
  int threads = 0;
};

struct EigEstimate {
  double value = 0;      // nats
  double std_error = 0;
  int fallback_count = 0;   // outer samples rerun with Laplace importance sampling
  int degenerate_count = 0; // outer samples that tripped the underflow trigger
  int excluded_count = 0;   // fallback MAP failures dropped from the mean
  std::string node_id;
};

/// Double-nested Monte Carlo EIG with log-sum-exp evidence and the
/// Laplace-importance fallback for degenerate outer samples.
EigEstimate estimate_eig(const infer::ParameterSampler& sampling, const StepModel& model,
                         const EigSettings& settings, const std::string& node_id = "");

/// log (1/M) sum_j f(obs | theta_j) pi(theta_j) / q(theta_j), theta_j ~ q.
double importance_evidence(const Vector& observation, const StepModel& model,
                           const infer::ParameterSampler& prior,
                           const infer::ParameterSampler& proposal, int m_inner,
                           std::mt19937_64& rng);

/// Builds the per-sample Laplace proposal (MAP + finite-difference Hessian)
/// and evaluates importance_evidence with it.
std::optional<double> laplace_importance_evidence(const Vector& observation,
                                                  const Vector& theta_start,
                                                  const StepModel& model,
                                                  const infer::ParameterSampler& prior,
                                                  int m_inner, std::mt19937_64& rng);

struct SelectionResult {
  char axis = 'A';
  EigEstimate eig_a, eig_b;
  bool tie = false;
};

/// Argmax over two candidate observation models; ties (overlapping one
/// standard error) break toward A and are flagged.
SelectionResult select_between(const infer::ParameterSampler& posterior,
                               const StepModel& model_a, const StepModel& model_b,
                               const EigSettings& settings,
                               const std::string& name_a = "A",
                               const std::string& name_b = "B");

SelectionResult select_next_step(const infer::ParameterSampler& posterior,
                                 const std::string& current_node,
                                 const surrogate::SurrogateBank& bank,
                                 const infer::NoiseModel& noise,
                                 const EigSettings& settings);

/// Supplies the (noisy) measured observation at a tree node.
class TruthSource {
 public:
  virtual ~TruthSource() = default;
  virtual structure::FieldObservation observation(const std::string& node) const = 0;
};

reduce::ReducedObservation reduce_observation(const structure::FieldObservation& obs,
                                              const surrogate::NodeModels& models);

struct IccSettings {
  EigSettings eig;
  infer::LaplaceSettings laplace;
  int depth = 5;
  char first_step = 'A';
  std::uint64_t seed = 0;
};

struct IccStep {
  std::string node;
  infer::GaussianPosterior posterior;
  std::optional<SelectionResult> selection;  // empty after the final step
  double wall_seconds = 0;
};

struct IccResult {
  std::string path;
  std::vector<IccStep> steps;
  infer::PosteriorSummary final_summary;
};

/// The feedback loop: measure at the current node, update the posterior,
/// pick the next axis by EIG; the sampling distribution at each decision is
/// the posterior just computed.
IccResult run_icc(const TruthSource& truth, const surrogate::SurrogateBank& bank,
                  const infer::PriorSpec& prior, const infer::NoiseModel& noise,
                  const IccSettings& settings);

}  // namespace icc::boed
