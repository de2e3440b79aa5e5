// Test-only oracles, independent of the implementation paths they check.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <stdexcept>

#include "icc/material.hpp"

namespace oracle {

using icc::material::MaterialParams;
using icc::material::MaterialState;
using icc::material::SymmetricTensor;

// von Mises effective stress from invariants, no eigendecomposition.
inline double von_mises(const SymmetricTensor& s) {
  const double p = s.trace() / 3.0;
  const double sxx = s[0] - p, syy = s[1] - p, szz = s[2] - p;
  const double j2 = 0.5 * (sxx * sxx + syy * syy + szz * szz) +
                    s[3] * s[3] + s[4] * s[4] + s[5] * s[5];
  return std::sqrt(3.0 * j2);
}

struct RadialReturnResult {
  SymmetricTensor stress;
  double kappa;
  bool plastic;
};

// Classical radial return for the a=2 (von Mises) surface with Voce
// hardening, solved by bisection on the hardening increment.
inline RadialReturnResult radial_return(const SymmetricTensor& dstrain,
                                        const MaterialState& state,
                                        const MaterialParams& mp) {
  const double la = mp.lambda(), mu = mp.mu();
  SymmetricTensor strain_new;
  strain_new.v = state.strain.v + dstrain.v;
  SymmetricTensor elastic;
  elastic.v = strain_new.v - state.plastic_strain.v;
  SymmetricTensor trial;
  const double tr = elastic.trace();
  for (int i = 0; i < 3; ++i) trial.v[i] = la * tr + 2.0 * mu * elastic.v[i];
  for (int i = 3; i < 6; ++i) trial.v[i] = 2.0 * mu * elastic.v[i];

  auto flow = [&](double k) { return mp.sigma_y + mp.A * (1.0 - std::exp(-mp.n * k)); };
  const double phi_tr = von_mises(trial);
  if (phi_tr - flow(state.kappa) <= 0.0) return {trial, state.kappa, false};

  auto g = [&](double dk) { return phi_tr - 3.0 * mu * dk - flow(state.kappa + dk); };
  double lo = 0.0, hi = phi_tr / (3.0 * mu);
  if (g(hi) > 0) throw std::runtime_error("radial return: bracket failure");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > 0 ? lo : hi) = mid;
  }
  const double dk = 0.5 * (lo + hi);

  const double p = trial.trace() / 3.0;
  const double phi_new = phi_tr - 3.0 * mu * dk;
  const double scale = phi_new / phi_tr;
  RadialReturnResult r;
  for (int i = 0; i < 3; ++i) r.stress.v[i] = p + (trial.v[i] - p) * scale;
  for (int i = 3; i < 6; ++i) r.stress.v[i] = trial.v[i] * scale;
  r.kappa = state.kappa + dk;
  r.plastic = true;
  return r;
}

inline SymmetricTensor random_stress(std::mt19937_64& rng, double scale = 200.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  SymmetricTensor s;
  for (int i = 0; i < 6; ++i) s.v[i] = u(rng);
  return s;
}

// Empirical star-discrepancy estimate over origin-anchored boxes with
// random upper corners.
inline double discrepancy_estimate(const Eigen::MatrixXd& pts01, int test_boxes,
                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Eigen::Index n = pts01.rows(), d = pts01.cols();
  double worst = 0.0;
  for (int b = 0; b < test_boxes; ++b) {
    Eigen::VectorXd corner(d);
    double vol = 1.0;
    for (Eigen::Index k = 0; k < d; ++k) {
      corner[k] = u(rng);
      vol *= corner[k];
    }
    Eigen::Index inside = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      bool in = true;
      for (Eigen::Index k = 0; k < d && in; ++k) in = pts01(i, k) < corner[k];
      if (in) ++inside;
    }
    worst = std::max(worst,
                     std::abs(static_cast<double>(inside) / static_cast<double>(n) - vol));
  }
  return worst;
}

// Gauss-Legendre nodes/weights on [a, b] (Newton on Legendre polynomials).
inline void gauss_legendre(int n, double a, double b, std::vector<double>& x,
                           std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double dp = n * (t * p1 - p0) / (t * t - 1.0);
      const double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) {
        x[i] = 0.5 * (b - a) * t + 0.5 * (a + b);
        w[i] = (b - a) / ((1.0 - t * t) * dp * dp);
        break;
      }
    }
  }
}

// Exact posterior for a linear-Gaussian model: prior N(mu0, S0),
// observation y = G theta + e, e ~ N(0, Psi).
struct ConjugatePosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

inline ConjugatePosterior conjugate_posterior(const Eigen::MatrixXd& g,
                                              const Eigen::MatrixXd& psi,
                                              const Eigen::VectorXd& mu0,
                                              const Eigen::MatrixXd& s0,
                                              const Eigen::VectorXd& y) {
  const Eigen::MatrixXd prec =
      s0.inverse() + g.transpose() * psi.inverse() * g;
  ConjugatePosterior c;
  c.cov = prec.inverse();
  c.mean = c.cov * (s0.inverse() * mu0 + g.transpose() * psi.inverse() * y);
  return c;
}

}  // namespace oracle
