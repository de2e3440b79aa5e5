#pragma once

#include <Eigen/Core>

#include "icc/common.hpp"

namespace icc::material {

using Vector6 = Eigen::Matrix<double, 6, 1>;
using Matrix6 = Eigen::Matrix<double, 6, 6>;

/// Elastic constants plus the unknown parameter vector [sigma_y, A, n, a].
/// All stresses in MPa, lengths in mm, forces in N.
struct MaterialParams {
  double E = 68300.0;   // Young's modulus (MPa)
  double nu = 0.33;     // Poisson ratio
  double sigma_y = 293.1;  // initial yield stress (MPa)
  double A = 94.0;      // hardening modulus (MPa)
  double n = 14.35;     // hardening exponent
  double a = 11.19;     // Hosford exponent

  double lambda() const { return E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)); }
  double mu() const { return E / (2.0 * (1.0 + nu)); }
  void validate() const;
};

/// Symmetric second-order tensor, components ordered xx, yy, zz, xy, yz, zx.
/// Shear entries are tensorial (eps_xy, not the engineering gamma_xy).
struct SymmetricTensor {
  Vector6 v = Vector6::Zero();

  SymmetricTensor() = default;
  explicit SymmetricTensor(const Vector6& values) : v(values) {}

  double& operator[](int i) { return v[i]; }
  double operator[](int i) const { return v[i]; }

  Eigen::Matrix3d matrix() const {
    Eigen::Matrix3d m;
    m << v[0], v[3], v[5],
         v[3], v[1], v[4],
         v[5], v[4], v[2];
    return m;
  }
  static SymmetricTensor from_matrix(const Eigen::Matrix3d& m) {
    SymmetricTensor t;
    t.v << m(0, 0), m(1, 1), m(2, 2), m(0, 1), m(1, 2), m(2, 0);
    return t;
  }
  double trace() const { return v[0] + v[1] + v[2]; }
};

/// History at a material point. `strain` is the total strain at the last
/// converged update; it closes the incremental interface (the elastic
/// predictor needs C:(eps - eps_p), not just the increment).
struct MaterialState {
  SymmetricTensor plastic_strain;
  SymmetricTensor strain;
  double kappa = 0.0;
};

struct Tolerances {
  double consistency = 1e-10;   // |g| <= consistency * sigma_y
  double plane_stress = 1e-8;   // |sigma_zz| <= plane_stress * sigma_y
  int max_iterations = 50;
};

struct StressUpdateResult {
  SymmetricTensor stress;
  MaterialState state;
  Matrix6 tangent = Matrix6::Zero();
  bool plastic = false;
  int iterations = 0;
};

/// In-plane result; vector ordering (xx, yy, xy) with tensorial shear.
/// `tangent` maps tensorial in-plane strain increments to stresses.
struct PlaneStressResult {
  Eigen::Vector3d stress = Eigen::Vector3d::Zero();
  MaterialState state;
  Eigen::Matrix3d tangent = Eigen::Matrix3d::Zero();
  bool plastic = false;
  double dstrain_zz = 0.0;  // out-of-plane increment found by the solver
};

/// Isotropic elastic stiffness acting on tensorial strain components.
Matrix6 elastic_stiffness(const MaterialParams& p);

/// Hosford equivalent stress, Eq-form (0.5 sum |p_i - p_j|^a)^(1/a) over the
/// principal stresses of the full tensor. Positively homogeneous of degree 1.
double hosford_effective_stress(const SymmetricTensor& stress, double a);
double hosford_effective_stress(const Eigen::Vector3d& principal, double a);

/// d(phi)/d(principal stress); used by the return mapping and exposed for
/// the tangent property tests.
Eigen::Vector3d hosford_gradient(const Eigen::Vector3d& principal, double a);

/// Voce flow stress sigma_y + A (1 - exp(-n kappa)).
double flow_stress(double kappa, const MaterialParams& p);
double flow_stress_derivative(double kappa, const MaterialParams& p);

double yield_function(const SymmetricTensor& stress, double kappa,
                      const MaterialParams& p);

/// Implicit stress update: elastic predictor, then closest-point projection
/// in principal space with a fully implicit flow direction. The returned
/// tangent is the consistent tangent by central finite differences of the
/// update map.
StressUpdateResult stress_update(const SymmetricTensor& strain_increment,
                                 const MaterialState& state,
                                 const MaterialParams& p, const Tolerances& tol);

/// Same update without the finite-difference tangent (hot path for the FE
/// assembly and the plane-stress probes).
StressUpdateResult stress_update_no_tangent(const SymmetricTensor& strain_increment,
                                            const MaterialState& state,
                                            const MaterialParams& p,
                                            const Tolerances& tol);

/// Plane-stress condensation: iterates the zz strain increment until
/// |sigma_zz| <= tol.plane_stress * sigma_y. `dstrain_zz_hint`, when given,
/// warm-starts the scalar iteration. `want_tangent` controls whether the
/// condensed 3x3 tangent is computed.
PlaneStressResult plane_stress_update(const Eigen::Vector3d& strain_increment,
                                      const MaterialState& state,
                                      const MaterialParams& p, const Tolerances& tol,
                                      bool want_tangent = true,
                                      const double* dstrain_zz_hint = nullptr);

}  // namespace icc::material
