#pragma once

#include <map>
#include <string>

#include "icc/boed.hpp"
#include "icc/config.hpp"
#include "icc/report.hpp"

namespace icc::pipeline {

struct NodeTruth {
  structure::FieldObservation clean, noisy;
};

using TruthMap = std::map<std::string, NodeTruth>;

/// Solve the load-path tree once under the truth parameters (shared
/// prefixes solved once) and attach per-node synthetic noise.
TruthMap generate_truth(const config::RunConfig& cfg);

/// In-memory truth source over a generated map.
class MapTruthSource : public boed::TruthSource {
 public:
  MapTruthSource(const TruthMap& map, bool noisy = true) : map_(map), noisy_(noisy) {}
  structure::FieldObservation observation(const std::string& node) const override;

 private:
  const TruthMap& map_;
  bool noisy_;
};

/// Reduced-space data sequence along a path.
std::vector<reduce::ReducedObservation> path_data(const std::string& path,
                                                  const boed::TruthSource& truth,
                                                  const surrogate::SurrogateBank& bank);

/// Reconstructed field observation predicted by the bank at theta.
structure::FieldObservation predict_observation(const surrogate::SurrogateBank& bank,
                                                const std::string& node,
                                                const Vector& theta);

/// Truth directory access for the CLI commands.
void write_truth(const TruthMap& truth, const structure::CruciformMesh& mesh,
                 const config::RunConfig& cfg, const std::string& out);

class FileTruthSource : public boed::TruthSource {
 public:
  explicit FileTruthSource(std::string truth_dir, bool noisy = true);
  structure::FieldObservation observation(const std::string& node) const override;

 private:
  std::string dir_;
  bool noisy_;
};

int cmd_generate_truth(const config::RunConfig& cfg, const std::string& out);
int cmd_train_surrogates(const config::RunConfig& cfg, const std::string& out);
int cmd_run_icc(const config::RunConfig& cfg, const std::string& out);
int cmd_sweep_paths(const config::RunConfig& cfg, const std::string& out);
int cmd_calibrate_path(const config::RunConfig& cfg, const std::string& out,
                       const std::string& path, bool with_mcmc);
int cmd_validate(const config::RunConfig& cfg, const std::string& out,
                 const std::string& calibration_path, const std::string& prediction_path);
int cmd_eig_oracle(const config::RunConfig& cfg);

}  // namespace icc::pipeline
