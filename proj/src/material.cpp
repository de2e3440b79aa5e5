#include "icc/material.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

namespace icc::material {

namespace {

// Signed |x|^(a-1) and |x|^(a-2) for one principal-stress difference,
// sharing a single log/exp pair.
struct DiffPowers {
  double f = 0;   // |x|^(a-1) * sign(x)
  double fp = 0;  // |x|^(a-2)
  double pa = 0;  // |x|^a
};

DiffPowers diff_powers(double x, double a) {
  DiffPowers d;
  const double ax = std::abs(x);
  if (ax < 1e-300) return d;
  if (ax == 1.0) {  // the scaled-out largest difference
    d.fp = 1.0;
    d.f = x >= 0 ? 1.0 : -1.0;
    d.pa = 1.0;
    return d;
  }
  const double lg = std::log(ax);
  d.fp = std::exp((a - 2.0) * lg);
  d.f = d.fp * ax * (x >= 0 ? 1.0 : -1.0);
  d.pa = d.fp * ax * ax;
  return d;
}

struct PrincipalHosford {
  double phi = 0;
  Eigen::Vector3d grad = Eigen::Vector3d::Zero();
  Eigen::Matrix3d hess = Eigen::Matrix3d::Zero();
};

// phi, dphi/dp and d2phi/dp2 in principal space, scaled by the largest
// difference so the a-th powers stay conditioned for a up to ~20.
// The difference map d_k = D_k . p with D rows (1,-1,0), (0,1,-1), (-1,0,1)
// is unrolled below.
PrincipalHosford hosford_principal(const Eigen::Vector3d& p, double a, bool want_hess) {
  PrincipalHosford r;
  const Eigen::Vector3d d(p[0] - p[1], p[1] - p[2], p[2] - p[0]);
  const double m = d.cwiseAbs().maxCoeff();
  if (m == 0.0) return r;

  DiffPowers w[3];
  double u = 0;
  for (int k = 0; k < 3; ++k) {
    w[k] = diff_powers(d[k] / m, a);
    u += 0.5 * w[k].pa;
  }
  const double u1a = std::pow(u, 1.0 / a);
  r.phi = m * u1a;

  const Eigen::Vector3d gh(0.5 * (w[0].f - w[2].f), 0.5 * (w[1].f - w[0].f),
                           0.5 * (w[2].f - w[1].f));
  const double u_pow1 = u1a / u;  // u^(1/a - 1)
  r.grad = u_pow1 * gh;

  if (want_hess) {
    Eigen::Matrix3d hu;
    hu << w[0].fp + w[2].fp, -w[0].fp, -w[2].fp,
          -w[0].fp, w[0].fp + w[1].fp, -w[1].fp,
          -w[2].fp, -w[1].fp, w[1].fp + w[2].fp;
    r.hess = ((a - 1.0) / m) *
             (0.5 * u_pow1 * hu - (u_pow1 / u) * gh * gh.transpose());
  }
  return r;
}

Eigen::Vector3d principal_values(const SymmetricTensor& t, Eigen::Matrix3d* vectors) {
  // Plane-stress-structured tensors (no yz/zx coupling) keep the z axis
  // principal; the remaining 2x2 block has a closed form.
  if (t.v[4] == 0.0 && t.v[5] == 0.0) {
    const double mean = 0.5 * (t.v[0] + t.v[1]);
    const double rad = std::hypot(0.5 * (t.v[0] - t.v[1]), t.v[3]);
    double p[3] = {mean - rad, mean + rad, t.v[2]};
    // angle of the first in-plane principal direction
    const double theta = 0.5 * std::atan2(2.0 * t.v[3], t.v[0] - t.v[1]);
    const double c = std::cos(theta), s = std::sin(theta);
    Eigen::Vector3d ev;
    Eigen::Matrix3d q;
    // ascending order with the z value slotted in
    const Eigen::Vector3d cols[3] = {{-s, c, 0}, {c, s, 0}, {0, 0, 1}};
    int order[3] = {0, 1, 2};
    if (p[order[0]] > p[order[1]]) std::swap(order[0], order[1]);
    if (p[order[1]] > p[order[2]]) std::swap(order[1], order[2]);
    if (p[order[0]] > p[order[1]]) std::swap(order[0], order[1]);
    for (int i = 0; i < 3; ++i) {
      ev[i] = p[order[i]];
      if (vectors) vectors->col(i) = cols[order[i]];
    }
    return ev;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es;
  es.computeDirect(t.matrix(), vectors ? Eigen::ComputeEigenvectors
                                       : Eigen::EigenvaluesOnly);
  if (vectors) *vectors = es.eigenvectors();
  return es.eigenvalues();
}

// Principal-space elastic stiffness (normal block of the isotropic tensor).
Eigen::Matrix3d principal_stiffness(const MaterialParams& p) {
  const double la = p.lambda(), mu = p.mu();
  Eigen::Matrix3d c;
  c << la + 2 * mu, la, la,
       la, la + 2 * mu, la,
       la, la, la + 2 * mu;
  return c;
}

SymmetricTensor compose(const Eigen::Vector3d& principal, const Eigen::Matrix3d& q) {
  return SymmetricTensor::from_matrix(q * principal.asDiagonal() * q.transpose());
}

// Closest-point projection in principal space. Unknowns: the three updated
// principal stresses and the hardening increment; the flow direction is
// evaluated at the updated stress.
struct ReturnMapOut {
  Eigen::Vector3d principal;
  double dkappa = 0;
  int iterations = 0;
};

struct WarmStart {
  Eigen::Vector3d principal;
  double dkappa = 0;
};

ReturnMapOut return_map(const Eigen::Vector3d& p_trial, double kappa0,
                        const MaterialParams& mp, const Tolerances& tol,
                        const WarmStart* warm = nullptr) {
  const Eigen::Matrix3d cp = principal_stiffness(mp);
  const double tol_abs = tol.consistency * mp.sigma_y;

  // Initial guess: scale the trial deviator onto the current yield surface
  // (exact there by homogeneity and pressure independence), with the
  // classical hardening estimate for the multiplier. Keeps Newton fast even
  // for the huge trial overshoots of early equilibrium iterations.
  const double phi_trial = hosford_principal(p_trial, mp.a, false).phi;
  Eigen::Vector3d p = p_trial;
  double dk = 0.0;
  if (warm) {
    p = warm->principal;
    dk = warm->dkappa;
  } else {
    const double flow0 = flow_stress(kappa0, mp);
    if (phi_trial > flow0 && phi_trial > 0) {
      const double hydro = p_trial.mean();
      dk = (phi_trial - flow0) /
           (3.0 * mp.mu() + flow_stress_derivative(kappa0, mp));
      const double scale = flow_stress(kappa0 + dk, mp) / phi_trial;
      p = Eigen::Vector3d::Constant(hydro) + scale * (p_trial.array() - hydro).matrix();
    }
  }

  auto residual = [&](const Eigen::Vector3d& pp, double dkap, PrincipalHosford& h) {
    h = hosford_principal(pp, mp.a, true);
    Eigen::Vector4d r;
    r.head<3>() = pp - p_trial + dkap * (cp * h.grad);
    r[3] = h.phi - flow_stress(kappa0 + dkap, mp);
    return r;
  };

  // The consistency residual keeps the spec tolerance; the stress equations
  // get a relative guard so extreme trial overshoots (equilibrium iterates
  // far from the solution) are not asked to beat double-precision
  // cancellation of terms at the trial magnitude.
  const double stress_tol =
      std::max(tol_abs, 1e-11 * p_trial.cwiseAbs().maxCoeff());

  PrincipalHosford h;
  Eigen::Vector4d r = residual(p, dk, h);
  for (int it = 1; it <= tol.max_iterations; ++it) {
    if (std::abs(r[3]) <= tol_abs &&
        r.head<3>().lpNorm<Eigen::Infinity>() <= stress_tol) {
      ReturnMapOut out{p, dk, it};
      return out;
    }
    Eigen::Matrix4d jac;
    jac.topLeftCorner<3, 3>() =
        Eigen::Matrix3d::Identity() + dk * (cp * h.hess);
    jac.topRightCorner<3, 1>() = cp * h.grad;
    jac.bottomLeftCorner<1, 3>() = h.grad.transpose();
    jac(3, 3) = -flow_stress_derivative(kappa0 + dk, mp);

    const Eigen::Vector4d dx = jac.inverse() * (-r);
    double step = 1.0;
    const double rnorm = r.norm();
    for (int ls = 0; ls < 12; ++ls) {
      Eigen::Vector3d pn = p + step * dx.head<3>();
      double dkn = std::max(0.0, dk + step * dx[3]);
      PrincipalHosford hn;
      const Eigen::Vector4d rn = residual(pn, dkn, hn);
      if (rn.norm() < rnorm || ls == 11) {
        p = pn;
        dk = dkn;
        r = rn;
        h = hn;
        break;
      }
      step *= 0.5;
    }
  }
  if (std::abs(r[3]) <= tol_abs &&
      r.head<3>().lpNorm<Eigen::Infinity>() <= stress_tol) {
    return ReturnMapOut{p, dk, tol.max_iterations};
  }
  throw ConvergenceError("return mapping did not converge (|g|=" +
                             std::to_string(std::abs(r[3])) + " MPa)",
                         tol.max_iterations);
}

StressUpdateResult update_core(const SymmetricTensor& dstrain,
                               const MaterialState& state, const MaterialParams& mp,
                               const Tolerances& tol,
                               const WarmStart* warm = nullptr,
                               WarmStart* solution = nullptr) {
  if (!dstrain.v.allFinite()) throw std::invalid_argument("non-finite strain increment");
  mp.validate();

  StressUpdateResult res;
  res.state = state;
  res.state.strain.v = state.strain.v + dstrain.v;

  const Matrix6 c6 = elastic_stiffness(mp);
  SymmetricTensor trial(c6 * (res.state.strain.v - state.plastic_strain.v));

  Eigen::Matrix3d q;
  Eigen::Vector3d p_tr = principal_values(trial, &q);

  // Perturb (near-)repeated principal stresses before differentiating; the
  // shift is below every test tolerance.
  const double sep = 1e-10 * std::max(1.0, p_tr.cwiseAbs().maxCoeff());
  if (std::abs(p_tr[0] - p_tr[1]) < sep) p_tr[0] -= 1e-10 * mp.sigma_y;
  if (std::abs(p_tr[1] - p_tr[2]) < sep) p_tr[2] += 1e-10 * mp.sigma_y;
  if (std::abs(p_tr[0] - p_tr[2]) < sep) p_tr[2] += 2e-10 * mp.sigma_y;

  const double g_trial =
      hosford_effective_stress(p_tr, mp.a) - flow_stress(state.kappa, mp);
  if (g_trial <= 0.0) {
    res.stress = trial;
    res.plastic = false;
    return res;
  }

  const ReturnMapOut rm = return_map(p_tr, state.kappa, mp, tol, warm);
  const Eigen::Vector3d n = hosford_gradient(rm.principal, mp.a);

  res.stress = compose(rm.principal, q);
  res.state.plastic_strain.v += compose(rm.dkappa * n, q).v;
  res.state.kappa = state.kappa + rm.dkappa;
  res.plastic = true;
  res.iterations = rm.iterations;
  if (solution) {
    solution->principal = rm.principal;
    solution->dkappa = rm.dkappa;
  }
  return res;
}

double fd_step(const SymmetricTensor& total_strain) {
  return 1e-7 * std::max(total_strain.v.norm(), 1e-2);
}

}  // namespace

void MaterialParams::validate() const {
  if (!(E > 0)) throw std::invalid_argument("E must be positive");
  if (!(nu > 0 && nu < 0.5)) throw std::invalid_argument("nu must be in (0, 0.5)");
  if (!(sigma_y > 0)) throw std::invalid_argument("sigma_y must be positive");
  if (!(A >= 0)) throw std::invalid_argument("A must be non-negative");
  if (!(n > 0)) throw std::invalid_argument("n must be positive");
  if (!(a > 1)) throw std::invalid_argument("Hosford exponent must exceed 1");
}

Matrix6 elastic_stiffness(const MaterialParams& p) {
  const double la = p.lambda(), mu = p.mu();
  Matrix6 c = Matrix6::Zero();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) c(i, j) = la;
    c(i, i) += 2 * mu;
    c(3 + i, 3 + i) = 2 * mu;  // tensorial shear strain
  }
  return c;
}

double hosford_effective_stress(const Eigen::Vector3d& principal, double a) {
  if (!(a > 1)) throw std::invalid_argument("Hosford exponent must exceed 1");
  if (!principal.allFinite()) throw std::invalid_argument("non-finite stress");
  return hosford_principal(principal, a, false).phi;
}

double hosford_effective_stress(const SymmetricTensor& stress, double a) {
  if (!stress.v.allFinite()) throw std::invalid_argument("non-finite stress");
  return hosford_effective_stress(principal_values(stress, nullptr), a);
}

Eigen::Vector3d hosford_gradient(const Eigen::Vector3d& principal, double a) {
  return hosford_principal(principal, a, false).grad;
}

double flow_stress(double kappa, const MaterialParams& p) {
  if (kappa < 0) throw std::invalid_argument("kappa must be non-negative");
  return p.sigma_y + p.A * (1.0 - std::exp(-p.n * kappa));
}

double flow_stress_derivative(double kappa, const MaterialParams& p) {
  return p.A * p.n * std::exp(-p.n * kappa);
}

double yield_function(const SymmetricTensor& stress, double kappa,
                      const MaterialParams& p) {
  return hosford_effective_stress(stress, p.a) - flow_stress(kappa, p);
}

StressUpdateResult stress_update_no_tangent(const SymmetricTensor& dstrain,
                                            const MaterialState& state,
                                            const MaterialParams& p,
                                            const Tolerances& tol) {
  return update_core(dstrain, state, p, tol);
}

StressUpdateResult stress_update(const SymmetricTensor& dstrain,
                                 const MaterialState& state, const MaterialParams& p,
                                 const Tolerances& tol) {
  StressUpdateResult res = update_core(dstrain, state, p, tol);
  if (!res.plastic) {
    res.tangent = elastic_stiffness(p);
    return res;
  }
  const double h = fd_step(res.state.strain);
  for (int j = 0; j < 6; ++j) {
    SymmetricTensor dp = dstrain, dm = dstrain;
    dp.v[j] += h;
    dm.v[j] -= h;
    const StressUpdateResult rp = update_core(dp, state, p, tol);
    const StressUpdateResult rm = update_core(dm, state, p, tol);
    res.tangent.col(j) = (rp.stress.v - rm.stress.v) / (2.0 * h);
  }
  return res;
}

PlaneStressResult plane_stress_update(const Eigen::Vector3d& dstrain,
                                      const MaterialState& state,
                                      const MaterialParams& p, const Tolerances& tol,
                                      bool want_tangent,
                                      const double* dstrain_zz_hint) {
  const double la = p.lambda(), mu = p.mu();
  const double czz = la + 2 * mu;
  const double tol_abs = tol.plane_stress * p.sigma_y;

  auto make6 = [&](double dezz) {
    SymmetricTensor d;
    d.v << dstrain[0], dstrain[1], dezz, dstrain[2], 0.0, 0.0;
    return d;
  };

  // Start from the caller's hint when given (normally last iteration's
  // root), otherwise from the elastic guess that zeroes the trial sigma_zz.
  double dezz;
  if (dstrain_zz_hint) {
    dezz = *dstrain_zz_hint;
  } else {
    dezz = -la / czz * (dstrain[0] + dstrain[1]);
    const SymmetricTensor e = make6(dezz);
    const Vector6 trial =
        elastic_stiffness(p) * (state.strain.v + e.v - state.plastic_strain.v);
    dezz -= trial[2] / czz;
  }

  WarmStart ws;
  bool have_ws = false;
  auto eval = [&](double zz, StressUpdateResult* full) {
    WarmStart ws_out;
    const StressUpdateResult res = update_core(make6(zz), state, p, tol,
                                               have_ws ? &ws : nullptr, &ws_out);
    if (res.plastic) {
      ws = ws_out;
      have_ws = true;
    }
    if (full) *full = res;
    return res.stress[2];
  };

  StressUpdateResult r;
  eval(dezz, &r);
  if (!r.plastic && std::abs(r.stress[2]) > tol_abs) {
    // elastic response is exactly linear in dezz
    dezz -= r.stress[2] / czz;
    eval(dezz, &r);
  }
  if (r.plastic) {
    // sigma_zz is monotone increasing in dezz. Elastic-slope Newton first
    // (never overshoots a softer-than-elastic response), then clamped
    // secant; a sign change hands over to regula falsi on the bracket.
    double x0 = dezz, f0 = r.stress[2];
    double x1 = x0, f1 = f0;
    bool have_bracket = false;
    double lo = 0, hi = 0, flo = 0, fhi = 0;
    int it = 0;
    while (std::abs(f1) > tol_abs) {
      if (++it > tol.max_iterations)
        throw ConvergenceError("plane-stress iteration did not converge",
                               tol.max_iterations);
      double x2;
      if (have_bracket) {
        x2 = (lo * fhi - hi * flo) / (fhi - flo);
        if (!(x2 > std::min(lo, hi) && x2 < std::max(lo, hi)) || it % 3 == 0)
          x2 = 0.5 * (lo + hi);
      } else if (it == 1 || x1 == x0 || f1 == f0) {
        x2 = x1 - f1 / czz;
      } else {
        x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        const double max_move = 4.0 * std::abs(x1 - x0) + 1e-8;
        x2 = std::clamp(x2, x1 - max_move, x1 + max_move);
      }
      const double f2 = eval(x2, nullptr);
      if (!have_bracket && f2 * f1 < 0) {
        have_bracket = true;
        lo = std::min(x1, x2);
        hi = std::max(x1, x2);
        flo = lo == x1 ? f1 : f2;
        fhi = hi == x1 ? f1 : f2;
      } else if (have_bracket) {
        if (f2 > 0) {
          hi = x2;
          fhi = f2;
        } else {
          lo = x2;
          flo = f2;
        }
      }
      x0 = x1;
      f0 = f1;
      x1 = x2;
      f1 = f2;
    }
    dezz = x1;
    eval(dezz, &r);
  }

  PlaneStressResult out;
  out.stress << r.stress[0], r.stress[1], r.stress[3];
  out.state = r.state;
  out.plastic = r.plastic;
  out.dstrain_zz = dezz;

  if (want_tangent) {
    if (!r.plastic) {
      // closed-form plane-stress elasticity
      const double f = p.E / (1.0 - p.nu * p.nu);
      out.tangent << f, f * p.nu, 0, f * p.nu, f, 0, 0, 0, 2 * mu;
    } else {
      // Forward FD of the 3-D map over (xx, yy, zz, xy) anchored at the
      // converged state, then static condensation of the zz row/column.
      // Probes warm-start from the converged return state; the equilibrium
      // solver only needs ~1e-6 tangent accuracy.
      const SymmetricTensor base = make6(dezz);
      const double h = fd_step(r.state.strain);
      Eigen::Matrix4d d4;
      const int comp[4] = {0, 1, 2, 3};
      const WarmStart probe_ws = ws;
      for (int j = 0; j < 4; ++j) {
        SymmetricTensor dp = base;
        dp.v[comp[j]] += h;
        const StressUpdateResult rp = update_core(dp, state, p, tol, &probe_ws, nullptr);
        for (int i = 0; i < 4; ++i)
          d4(i, j) = (rp.stress.v[comp[i]] - r.stress.v[comp[i]]) / h;
      }
      // indices in d4: 0=xx, 1=yy, 2=zz, 3=xy
      const int in[3] = {0, 1, 3};
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          out.tangent(i, j) = d4(in[i], in[j]) - d4(in[i], 2) * d4(2, in[j]) / d4(2, 2);
    }
  }
  return out;
}

}  // namespace icc::material
