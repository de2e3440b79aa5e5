#pragma once

#include <deque>
#include <functional>

#include "icc/common.hpp"

namespace icc::opt {

struct Options {
  int max_iter = 100;
  double grad_tol = 1e-7;
  double step_tol = 1e-12;
  int history = 8;
  double fd_step = 1e-6;  // central-difference step for the numeric gradient
};

struct Result {
  Vector x;
  double f = 0;
  int iterations = 0;
  bool converged = false;
};

using Objective = std::function<double(const Vector&)>;
using Gradient = std::function<Vector(const Vector&)>;

inline Vector numeric_gradient(const Objective& f, const Vector& x, const Vector& lb,
                               const Vector& ub, double h) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp[i] = std::min(x[i] + h, ub[i]);
    xm[i] = std::max(x[i] - h, lb[i]);
    const double d = xp[i] - xm[i];
    g[i] = d > 0 ? (f(xp) - f(xm)) / d : 0.0;
  }
  return g;
}

// Box-constrained minimization: L-BFGS two-loop recursion with projection
// onto the box and Armijo backtracking. The history is dropped whenever the
// projection becomes active, which keeps the curvature pairs valid.
inline Result minimize(const Objective& f, const Vector& x0, const Vector& lb,
                       const Vector& ub, const Options& o = {},
                       const Gradient& grad_in = nullptr) {
  auto clamp = [&](Vector v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = std::clamp(v[i], lb[i], ub[i]);
    return v;
  };
  auto grad = [&](const Vector& x) {
    return grad_in ? grad_in(x) : numeric_gradient(f, x, lb, ub, o.fd_step);
  };

  Result r;
  r.x = clamp(x0);
  r.f = f(r.x);
  Vector g = grad(r.x);
  std::deque<Vector> ss, ys;
  std::deque<double> rhos;

  for (r.iterations = 0; r.iterations < o.max_iter; ++r.iterations) {
    if (g.lpNorm<Eigen::Infinity>() < o.grad_tol) {
      r.converged = true;
      break;
    }
    // two-loop recursion
    Vector q = g;
    std::vector<double> alpha(ss.size());
    for (int i = static_cast<int>(ss.size()) - 1; i >= 0; --i) {
      alpha[i] = rhos[i] * ss[i].dot(q);
      q -= alpha[i] * ys[i];
    }
    if (!ss.empty()) {
      const double gamma = ss.back().dot(ys.back()) / ys.back().squaredNorm();
      q *= gamma;
    }
    for (std::size_t i = 0; i < ss.size(); ++i) {
      const double beta = rhos[i] * ys[i].dot(q);
      q += (alpha[i] - beta) * ss[i];
    }
    Vector dir = -q;
    if (dir.dot(g) > -1e-14 * dir.norm() * g.norm()) dir = -g;  // not a descent dir

    double step = ss.empty() ? std::min(1.0, 1.0 / std::max(1e-12, g.norm())) : 1.0;
    Vector xn;
    double fn = r.f;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      xn = clamp(r.x + step * dir);
      fn = f(xn);
      if (fn <= r.f + 1e-4 * g.dot(xn - r.x)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted || (r.x - xn).lpNorm<Eigen::Infinity>() < o.step_tol) {
      r.converged = accepted;
      if (accepted) {
        r.x = xn;
        r.f = fn;
      }
      break;
    }
    Vector gn = grad(xn);
    Vector s = xn - r.x, y = gn - g;
    const double sy = s.dot(y);
    const bool projected = ((xn.array() == lb.array()) || (xn.array() == ub.array())).any();
    if (projected) {
      ss.clear();
      ys.clear();
      rhos.clear();
    } else if (sy > 1e-12 * s.norm() * y.norm()) {
      ss.push_back(s);
      ys.push_back(y);
      rhos.push_back(1.0 / sy);
      if (static_cast<int>(ss.size()) > o.history) {
        ss.pop_front();
        ys.pop_front();
        rhos.pop_front();
      }
    }
    r.x = xn;
    r.f = fn;
    g = gn;
  }
  return r;
}

}  // namespace icc::opt
