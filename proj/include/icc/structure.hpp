#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "icc/common.hpp"
#include "icc/material.hpp"

namespace icc::structure {

/// One quarter of a cross-shaped specimen, symmetric about both axes.
/// Lengths in mm. `arm_length` is measured from the specimen center.
struct CruciformGeometry {
  double arm_half_width = 25.0;
  double arm_length = 55.0;
  double fillet_radius = 6.0;
  double thickness_arm = 3.0;
  double thickness_gauge = 1.0;  // thinned central block
  double gauge_radius = 34.0;
  int center_divisions = 10;  // per side of the central block
  int fillet_divisions = 6;   // columns across the fillet span
  int outer_divisions = 1;    // columns from fillet to the loaded edge
  double outer_grading = 1.4;

  void validate() const;
};

struct CruciformMesh {
  std::vector<Eigen::Vector2d> nodes;
  std::vector<std::array<int, 4>> elements;  // counter-clockwise quads
  std::vector<double> element_thickness;
  std::vector<int> edge_a;      // loaded edge of arm A (x = arm_length)
  std::vector<int> edge_b;      // loaded edge of arm B (y = arm_length)
  std::vector<int> symmetry_x;  // x = 0, normal displacement fixed
  std::vector<int> symmetry_y;  // y = 0, normal displacement fixed
  std::vector<int> gauge_nodes;  // sampling region, sorted ascending
  double gauge_radius = 0.0;
  int fillet_segments = 0;  // polygonal segments approximating the fillet arc
};

CruciformMesh build_cruciform_mesh(const CruciformGeometry& geometry, int refinement);

struct LoadPath {
  std::string steps;        // axis labels, e.g. "AABAB"
  double increment = 0.25;  // mm per step on the stepped axis
};

struct NoiseSpec {
  double psi2_disp = 4e-6;    // mm^2 (4 um^2)
  double psi2_load = 582.11;  // N^2
  std::uint64_t seed = 0;
};

/// Gauge-region displacements and axis resultant loads at one tree node.
struct FieldObservation {
  int step = 0;         // 1-based position along the path
  std::string node_id;  // load-path-tree prefix
  Vector disp_x, disp_y;  // over gauge nodes, mesh order (mm)
  double load_x = 0.0, load_y = 0.0;  // full-specimen resultants (N)
  bool noisy = false;
};

/// Incremental quasi-static solver for one specimen. Owns all scratch state,
/// so independent instances run concurrently on a shared mesh.
class PathSolver {
 public:
  struct Settings {
    double rel_tol = 1e-8;
    double abs_tol = 1e-9;  // N, floor for near-zero reference residuals
    int max_newton = 30;
    int max_bisections = 4;
    double increment = 0.25;
  };

  struct Checkpoint {
    Vector u;
    std::vector<material::MaterialState> qp_states;
    double ua = 0.0, ub = 0.0;
    std::string node_id;
  };

  PathSolver(const CruciformMesh& mesh, const material::MaterialParams& params,
             Settings settings);
  PathSolver(const CruciformMesh& mesh, const material::MaterialParams& params)
      : PathSolver(mesh, params, Settings{}) {}
  ~PathSolver();
  PathSolver(PathSolver&&) noexcept;

  /// Advance one load step along `axis` ('A' or 'B') and return the
  /// converged noiseless observation.
  FieldObservation apply_step(char axis);

  /// Net internal force over all constrained x-dofs and y-dofs at the last
  /// converged state; vanishes when the solve is in equilibrium.
  Eigen::Vector2d constraint_force_balance() const;

  Checkpoint checkpoint() const;
  void restore(const Checkpoint& c);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Solve a whole path from the virgin state.
std::vector<FieldObservation> solve_load_path(const CruciformMesh& mesh,
                                              const material::MaterialParams& params,
                                              const LoadPath& path,
                                              PathSolver::Settings settings = {});

/// Single plane-stress material point driven through the path: an A step
/// increments eps_xx, a B step increments eps_yy, the other in-plane normal
/// strain is held and shear stays zero. Returns the in-plane stresses.
std::vector<Eigen::Vector3d> material_point_path(const material::MaterialParams& params,
                                                 const LoadPath& path,
                                                 double strain_increment);

/// Add iid Gaussian noise to every displacement entry and each load.
/// Streams derive from (seed, node_id), so a tree node's noise is identical
/// in every path that visits it.
std::vector<FieldObservation> synthesize_data(const std::vector<FieldObservation>& clean,
                                              const NoiseSpec& noise);

/// Observation CSV export: one row per gauge node per step plus a per-step
/// loads table.
void write_displacements_csv(const std::string& file,
                             const std::vector<FieldObservation>& obs,
                             const CruciformMesh& mesh);
void write_loads_csv(const std::string& file, const std::vector<FieldObservation>& obs);

}  // namespace icc::structure
