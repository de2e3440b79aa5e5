#pragma once

#include <optional>
#include <string>
#include <vector>

#include "icc/boed.hpp"
#include "icc/infer.hpp"
#include "icc/structure.hpp"
#include "icc/surrogate.hpp"

namespace icc::report {

/// Posterior predictive draws along one path: reduced-space predictions with
/// observation noise and the displacement fields reconstructed per draw.
struct PredictiveEnsemble {
  std::string path_id;
  std::vector<std::string> nodes;  // per step
  Matrix draws;                    // count x D parameter draws
  std::vector<Matrix> reduced;     // per step: count x (2p+2), noise included
  std::vector<Matrix> fields_x;    // per step: count x v
  std::vector<Matrix> fields_y;
};

PredictiveEnsemble posterior_predictive(const infer::GaussianPosterior& posterior,
                                        const std::string& path,
                                        const surrogate::SurrogateBank& bank,
                                        const infer::NoiseModel& noise, int count,
                                        std::uint64_t seed);

/// Point-wise empirical 95% bands over the ensemble, plus observed-minus-
/// bound difference arrays when the observed sequence is supplied.
struct CredibleBands {
  std::vector<double> load_x_lower, load_x_upper, load_y_lower, load_y_upper;
  std::vector<Vector> field_x_lower, field_x_upper, field_y_lower, field_y_upper;
  // Filled when observed data is given: observation minus bound, and the
  // fraction of gauge points outside the band per step.
  std::vector<Vector> diff_lower_x, diff_upper_x, diff_lower_y, diff_upper_y;
  std::vector<double> outside_fraction;
  bool loads_covered = true;  // all observed loads inside their bands
};

CredibleBands credible_band(const PredictiveEnsemble& ensemble,
                            const std::vector<structure::FieldObservation>* observed = nullptr);

/// Best-fit log predictive density: the data's total log-likelihood at the
/// MAP parameter estimate.
double bflpd(const std::vector<reduce::ReducedObservation>& data, const Vector& theta_map,
             const surrogate::SurrogateBank& bank, const infer::NoiseModel& noise);

/// The four additive likelihood terms (dispPCA_X, dispPCA_Y, load_X, load_Y)
/// summed over steps; their total equals log_likelihood exactly.
infer::NoiseModel::QoiTerms qoi_loglike_contributions(
    const std::vector<reduce::ReducedObservation>& data, const Vector& theta,
    const surrogate::SurrogateBank& bank, const infer::NoiseModel& noise);

struct ChannelErrors {
  double smape = 0;  // percent
  double mae = 0;
};

struct ErrorMetrics {
  ChannelErrors disp_x, disp_y, load_x, load_y;
};

/// sMAPE = 100 * mean(2|p-t| / (|p|+|t|)), zero-denominator points skipped.
ErrorMetrics error_metrics(const std::vector<structure::FieldObservation>& truth,
                           const std::vector<structure::FieldObservation>& prediction);

/// Fixed line scans through the gauge region: the horizontal diameter and
/// the 45-degree diagonal.
struct LineScan {
  std::string name;
  std::vector<int> gauge_indices;  // indices into the gauge node list
  Vector position;                 // normalized 0..1 along the scan
};

std::vector<LineScan> default_line_scans(const structure::CruciformMesh& mesh);

struct RunArtifacts {
  std::vector<std::pair<std::string, infer::PosteriorSummary>> calibrations;
  const boed::IccResult* icc = nullptr;
  std::vector<std::string> bflpd_rows, bflpd_cols;
  Matrix bflpd_matrix;  // rows: prediction paths, cols: calibrations

  struct LineScanData {
    std::string scan, component;
    int step = 0;
    Vector position, observed, map_prediction, lower, upper;
  };
  std::vector<LineScanData> line_scans;
};

/// Writes the CSV reports (posterior summaries, per-step EIG, BFLPD matrix,
/// correlation matrices, line-scan band data); returns the files written.
/// Re-running on unchanged artifacts reproduces the bytes exactly.
std::vector<std::string> emit_reports(const RunArtifacts& artifacts,
                                      const std::string& dir);

}  // namespace icc::report
