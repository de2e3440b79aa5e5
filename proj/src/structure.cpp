#include "icc/structure.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>

namespace icc::structure {

namespace {

// Quadrature-point position and bilinear shape derivatives for 2x2 Gauss.
const double kGp = 0.5773502691896258;

struct QuadPoint {
  Eigen::Matrix<double, 3, 8> b;  // engineering-strain B matrix
  double weight = 0.0;            // w * detJ * thickness
};

}  // namespace

void CruciformGeometry::validate() const {
  if (!(arm_half_width > 0 && arm_length > arm_half_width + fillet_radius))
    throw std::invalid_argument("cruciform: arm length too short for the fillet");
  if (!(fillet_radius > 0 && fillet_radius < arm_half_width))
    throw std::invalid_argument("cruciform: fillet radius must be below the arm half-width");
  if (!(thickness_arm > 0 && thickness_gauge > 0 && thickness_gauge <= thickness_arm))
    throw std::invalid_argument("cruciform: gauge must be no thicker than the arms");
  if (!(gauge_radius > 0)) throw std::invalid_argument("cruciform: gauge radius");
  if (center_divisions < 2 || fillet_divisions < 3 || outer_divisions < 1)
    throw std::invalid_argument("cruciform: division counts too small");
}

CruciformMesh build_cruciform_mesh(const CruciformGeometry& g, int refinement) {
  g.validate();
  const int scale = 1 << refinement;
  const int nc = g.center_divisions * scale;
  const int nf = g.fillet_divisions * scale;
  const int no = g.outer_divisions * scale;
  const double w = g.arm_half_width, r = g.fillet_radius, len = g.arm_length;
  // The fillet web splits along the 45-degree line through (w, w); the
  // column at x45 carries the shared arc midpoint.
  const double x45 = w + r * (1.0 - std::sqrt(0.5));
  const int nd = std::max(1, (nf + 2) / 3);  // columns on the diagonal span
  const int na = nf - nd;                    // columns on the arc span

  // Column positions along an arm (same list serves as arm-B row positions).
  std::vector<double> xs;
  for (int k = 1; k <= nd; ++k) xs.push_back(w + (x45 - w) * k / nd);
  for (int k = 1; k <= na; ++k) xs.push_back(x45 + (w + r - x45) * k / na);
  {
    const double span = len - (w + r);
    const double base = span * (g.outer_grading - 1.0) /
                        (std::pow(g.outer_grading, no) - 1.0);
    double x = w + r;
    for (int k = 0; k < no; ++k) {
      x += base * std::pow(g.outer_grading, k);
      xs.push_back(x);
    }
    xs.back() = len;  // kill accumulation error on the loaded edge
  }
  const int m = static_cast<int>(xs.size());

  // Material boundary height above arm A as a function of x.
  auto top = [&](double x) {
    if (x >= w + r) return w;
    if (x <= x45) return x;
    const double dx = x - (w + r);
    return (w + r) - std::sqrt(r * r - dx * dx);
  };

  CruciformMesh mesh;
  mesh.gauge_radius = g.gauge_radius;
  mesh.fillet_segments = 2 * na;

  auto add_node = [&](double x, double y) {
    mesh.nodes.emplace_back(x, y);
    return static_cast<int>(mesh.nodes.size()) - 1;
  };

  // Central block.
  std::vector<int> cid((nc + 1) * (nc + 1));
  for (int j = 0; j <= nc; ++j)
    for (int i = 0; i <= nc; ++i)
      cid[j * (nc + 1) + i] = add_node(w * i / nc, w * j / nc);
  auto c = [&](int i, int j) { return cid[j * (nc + 1) + i]; };

  // Arm A columns (k = 1..m); column 0 is the central block's right edge.
  std::vector<int> aid(m * (nc + 1));
  for (int k = 1; k <= m; ++k) {
    const double tx = top(xs[k - 1]);
    for (int j = 0; j <= nc; ++j)
      aid[(k - 1) * (nc + 1) + j] = add_node(xs[k - 1], tx * j / nc);
  }
  auto an = [&](int k, int j) { return k == 0 ? c(nc, j) : aid[(k - 1) * (nc + 1) + j]; };

  // Arm B rows; the last column of diagonal-span rows aliases arm A's top
  // nodes so the fillet interface conforms.
  std::vector<int> bid(m * (nc + 1));
  for (int k = 1; k <= m; ++k) {
    const double ty = top(xs[k - 1]);
    for (int i = 0; i <= nc; ++i) {
      if (i == nc && k <= nd)
        bid[(k - 1) * (nc + 1) + i] = an(k, nc);
      else
        bid[(k - 1) * (nc + 1) + i] = add_node(ty * i / nc, xs[k - 1]);
    }
  }
  auto bn = [&](int k, int i) { return k == 0 ? c(i, nc) : bid[(k - 1) * (nc + 1) + i]; };

  auto add_elem = [&](int n0, int n1, int n2, int n3, double t) {
    mesh.elements.push_back({n0, n1, n2, n3});
    mesh.element_thickness.push_back(t);
  };
  for (int j = 0; j < nc; ++j)
    for (int i = 0; i < nc; ++i)
      add_elem(c(i, j), c(i + 1, j), c(i + 1, j + 1), c(i, j + 1), g.thickness_gauge);
  for (int k = 1; k <= m; ++k)
    for (int j = 0; j < nc; ++j)
      add_elem(an(k - 1, j), an(k, j), an(k, j + 1), an(k - 1, j + 1), g.thickness_arm);
  for (int k = 1; k <= m; ++k)
    for (int i = 0; i < nc; ++i)
      add_elem(bn(k - 1, i), bn(k - 1, i + 1), bn(k, i + 1), bn(k, i), g.thickness_arm);

  for (int j = 0; j <= nc; ++j) mesh.edge_a.push_back(an(m, j));
  for (int i = 0; i <= nc; ++i) mesh.edge_b.push_back(bn(m, i));
  for (int j = 0; j <= nc; ++j) mesh.symmetry_x.push_back(c(0, j));
  for (int k = 1; k <= m; ++k) mesh.symmetry_x.push_back(bn(k, 0));
  for (int i = 0; i <= nc; ++i) mesh.symmetry_y.push_back(c(i, 0));
  for (int k = 1; k <= m; ++k) mesh.symmetry_y.push_back(an(k, 0));

  for (int n = 0; n < static_cast<int>(mesh.nodes.size()); ++n)
    if (mesh.nodes[n].norm() <= g.gauge_radius + 1e-12) mesh.gauge_nodes.push_back(n);
  std::sort(mesh.gauge_nodes.begin(), mesh.gauge_nodes.end());

  // Jacobian positivity at every quadrature point.
  for (const auto& e : mesh.elements) {
    for (int q = 0; q < 4; ++q) {
      const double xi = (q % 2 ? kGp : -kGp), eta = (q / 2 ? kGp : -kGp);
      Eigen::Matrix2d jac = Eigen::Matrix2d::Zero();
      for (int i = 0; i < 4; ++i) {
        const double sx = (i == 1 || i == 2) ? 1.0 : -1.0;
        const double sy = (i >= 2) ? 1.0 : -1.0;
        const double dxi = 0.25 * sx * (1 + sy * eta);
        const double deta = 0.25 * sy * (1 + sx * xi);
        jac(0, 0) += dxi * mesh.nodes[e[i]].x();
        jac(0, 1) += dxi * mesh.nodes[e[i]].y();
        jac(1, 0) += deta * mesh.nodes[e[i]].x();
        jac(1, 1) += deta * mesh.nodes[e[i]].y();
      }
      if (jac.determinant() <= 0.0)
        throw MeshError("degenerate element in cruciform mesh");
    }
  }
  return mesh;
}

// ---------------------------------------------------------------------------

struct PathSolver::Impl {
  const CruciformMesh& mesh;
  material::MaterialParams params;
  material::Tolerances mat_tol;
  Settings settings;

  int ndof = 0;
  std::vector<int> free_index;           // dof -> free position or -1
  std::vector<int> constraint_kind;      // dof -> 0 free, 1 zero, 2 edge A, 3 edge B
  int nfree = 0;

  std::vector<QuadPoint> qps;            // 4 per element
  std::vector<material::MaterialState> states;
  std::vector<double> zz_hints;
  std::vector<char> hint_valid;  // hint useful only while the point is plastic

  // Per-qp consistent-tangent cache; refreshed when the local strain
  // increment moves by more than the threshold, or the elastic/plastic
  // branch flips, since it was computed.
  std::vector<Eigen::Matrix3d> tan_cache;
  std::vector<Eigen::Vector3d> tan_deps;
  std::vector<char> tan_valid;
  std::vector<char> tan_branch;
  static constexpr double kTangentRefresh = 1e-4;
  int fresh_tangents = 0;

  Vector u;
  double ua = 0.0, ub = 0.0;
  std::string node_id;

  // repeat-axis extrapolation predictor
  Vector u_prev;
  char prev_axis = 0;
  Vector fint_converged;  // internal force at the last converged solve

  Eigen::SparseMatrix<double> k_ff;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  bool pattern_ready = false;
  // Elastic stiffness factorized once; predictor for fresh-axis steps.
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> elastic_ldlt;

  explicit Impl(const CruciformMesh& msh, const material::MaterialParams& p, Settings s)
      : mesh(msh), params(p), settings(s) {
    ndof = 2 * static_cast<int>(mesh.nodes.size());
    u = Vector::Zero(ndof);
    constraint_kind.assign(ndof, 0);
    for (int n : mesh.symmetry_x) constraint_kind[2 * n] = 1;
    for (int n : mesh.symmetry_y) constraint_kind[2 * n + 1] = 1;
    for (int n : mesh.edge_a) constraint_kind[2 * n] = 2;
    for (int n : mesh.edge_b) constraint_kind[2 * n + 1] = 3;
    free_index.assign(ndof, -1);
    for (int d = 0; d < ndof; ++d)
      if (constraint_kind[d] == 0) free_index[d] = nfree++;

    qps.resize(4 * mesh.elements.size());
    for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
      const auto& el = mesh.elements[e];
      for (int q = 0; q < 4; ++q) {
        const double xi = (q % 2 ? kGp : -kGp), eta = (q / 2 ? kGp : -kGp);
        Eigen::Matrix<double, 2, 4> dn;
        for (int i = 0; i < 4; ++i) {
          const double sx = (i == 1 || i == 2) ? 1.0 : -1.0;
          const double sy = (i >= 2) ? 1.0 : -1.0;
          dn(0, i) = 0.25 * sx * (1 + sy * eta);
          dn(1, i) = 0.25 * sy * (1 + sx * xi);
        }
        Eigen::Matrix2d jac = Eigen::Matrix2d::Zero();
        for (int i = 0; i < 4; ++i) jac += dn.col(i) * mesh.nodes[el[i]].transpose();
        const Eigen::Matrix<double, 2, 4> dx = jac.inverse() * dn;
        QuadPoint& qp = qps[4 * e + q];
        qp.b.setZero();
        for (int i = 0; i < 4; ++i) {
          qp.b(0, 2 * i) = dx(0, i);
          qp.b(1, 2 * i + 1) = dx(1, i);
          qp.b(2, 2 * i) = dx(1, i);
          qp.b(2, 2 * i + 1) = dx(0, i);
        }
        qp.weight = jac.determinant() * mesh.element_thickness[e];
      }
    }
    states.assign(qps.size(), {});
    zz_hints.assign(qps.size(), 0.0);
    hint_valid.assign(qps.size(), 0);
    tan_cache.assign(qps.size(), Eigen::Matrix3d::Zero());
    tan_deps.assign(qps.size(), Eigen::Vector3d::Zero());
    tan_valid.assign(qps.size(), 0);
    tan_branch.assign(qps.size(), 0);

    Vector fint(ndof);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(64 * mesh.elements.size());
    assemble(fint, &trips);  // virgin state: the elastic stiffness
    k_ff.resize(nfree, nfree);
    k_ff.setFromTriplets(trips.begin(), trips.end());
    elastic_ldlt.compute(k_ff);
    std::fill(tan_valid.begin(), tan_valid.end(), 0);
  }

  void apply_dirichlet() {
    for (int d = 0; d < ndof; ++d) {
      if (constraint_kind[d] == 1) u[d] = 0.0;
      else if (constraint_kind[d] == 2) u[d] = ua;
      else if (constraint_kind[d] == 3) u[d] = ub;
    }
  }

  // Assemble internal force (always) and the tangent (optional).
  int plastic_qps = 0;
  double max_deps = 0;
  void assemble(Vector& fint, std::vector<Eigen::Triplet<double>>* trips) {
    fint.setZero();
    plastic_qps = 0;
    max_deps = 0;
    fresh_tangents = 0;
    static const Eigen::Vector3d half(1.0, 1.0, 0.5);
    for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
      const auto& el = mesh.elements[e];
      Eigen::Matrix<double, 8, 1> ue;
      for (int i = 0; i < 4; ++i) {
        ue[2 * i] = u[2 * el[i]];
        ue[2 * i + 1] = u[2 * el[i] + 1];
      }
      Eigen::Matrix<double, 8, 1> fe = Eigen::Matrix<double, 8, 1>::Zero();
      Eigen::Matrix<double, 8, 8> ke = Eigen::Matrix<double, 8, 8>::Zero();
      for (int q = 0; q < 4; ++q) {
        const std::size_t idx = 4 * e + q;
        const QuadPoint& qp = qps[idx];
        Eigen::Vector3d eps = qp.b * ue;  // engineering shear
        eps[2] *= 0.5;                    // tensorial
        const material::MaterialState& st = states[idx];
        const Eigen::Vector3d deps(eps[0] - st.strain[0], eps[1] - st.strain[1],
                                   eps[2] - st.strain[3]);
        bool fresh_tangent =
            trips != nullptr &&
            (!tan_valid[idx] ||
             (deps - tan_deps[idx]).lpNorm<Eigen::Infinity>() > kTangentRefresh);
        const double* hint = hint_valid[idx] ? &zz_hints[idx] : nullptr;
        material::PlaneStressResult res = material::plane_stress_update(
            deps, st, params, mat_tol, fresh_tangent, hint);
        zz_hints[idx] = res.dstrain_zz;
        hint_valid[idx] = res.plastic ? 1 : 0;
        if (trips && !fresh_tangent && tan_branch[idx] != (res.plastic ? 1 : 0)) {
          res = material::plane_stress_update(deps, st, params, mat_tol, true,
                                              &zz_hints[idx]);
          fresh_tangent = true;
        }
        if (res.plastic) ++plastic_qps;
        max_deps = std::max(max_deps, deps.cwiseAbs().maxCoeff());
        fe += qp.b.transpose() * res.stress * qp.weight;
        if (trips) {
          if (fresh_tangent) {
            tan_cache[idx] = res.tangent;
            tan_deps[idx] = deps;
            tan_valid[idx] = 1;
            tan_branch[idx] = res.plastic ? 1 : 0;
            ++fresh_tangents;
          }
          const Eigen::Matrix3d d_eng = tan_cache[idx] * half.asDiagonal();
          ke += qp.b.transpose() * d_eng * qp.b * qp.weight;
        }
      }
      for (int i = 0; i < 8; ++i) {
        const int gi = 2 * el[i / 2] + (i % 2);
        fint[gi] += fe[i];
        if (trips && free_index[gi] >= 0) {
          for (int j = 0; j < 8; ++j) {
            const int gj = 2 * el[j / 2] + (j % 2);
            if (free_index[gj] >= 0)
              trips->emplace_back(free_index[gi], free_index[gj], ke(i, j));
          }
        }
      }
    }
  }

  void commit_states() {
    // States were written by the last assemble call only into the result
    // objects; recompute and store them at the converged displacement.
    for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
      const auto& el = mesh.elements[e];
      Eigen::Matrix<double, 8, 1> ue;
      for (int i = 0; i < 4; ++i) {
        ue[2 * i] = u[2 * el[i]];
        ue[2 * i + 1] = u[2 * el[i] + 1];
      }
      for (int q = 0; q < 4; ++q) {
        const std::size_t idx = 4 * e + q;
        Eigen::Vector3d eps = qps[idx].b * ue;
        eps[2] *= 0.5;
        const material::MaterialState& st = states[idx];
        const Eigen::Vector3d deps(eps[0] - st.strain[0], eps[1] - st.strain[1],
                                   eps[2] - st.strain[3]);
        const double* hint = hint_valid[idx] ? &zz_hints[idx] : nullptr;
        const material::PlaneStressResult res =
            material::plane_stress_update(deps, st, params, mat_tol, false, hint);
        states[idx] = res.state;
        tan_valid[idx] = 0;
      }
    }
  }

  // Residual at the current displacement; returns false on material failure.
  bool residual_only(Vector& fint, Vector& r, double& rn) {
    try {
      assemble(fint, nullptr);
    } catch (const ConvergenceError&) {
      return false;
    }
    for (int d = 0; d < ndof; ++d)
      if (free_index[d] >= 0) r[free_index[d]] = fint[d];
    rn = r.norm();
    return true;
  }

  bool newton_solve() {
    Vector fint(ndof);
    Vector r(nfree);
    std::vector<Eigen::Triplet<double>> trips;
    auto full_assemble = [&](Vector& rr, std::vector<Eigen::Triplet<double>>& tt) {
      tt.clear();
      tt.reserve(64 * mesh.elements.size());
      try {
        assemble(fint, &tt);
      } catch (const ConvergenceError&) {
        return false;  // material failure on a wild iterate; substep instead
      }
      for (int d = 0; d < ndof; ++d)
        if (free_index[d] >= 0) rr[free_index[d]] = fint[d];
      return true;
    };

    if (!full_assemble(r, trips)) return false;
    // Reference scale: the step's first out-of-balance force or the total
    // internal force (reactions included), whichever is larger.
    const double ref = std::max(r.norm(), fint.norm());
    for (int it = 0; it < settings.max_newton; ++it) {
      const double rn = r.norm();
      if (std::getenv("ICC_FE_TRACE"))
        std::fprintf(stderr, "  newton it %d |r| %.3e (ref %.3e) plastic %d max_deps %.3e\n",
                     it, rn, ref, plastic_qps, max_deps);
      if (rn <= std::max(settings.rel_tol * ref, settings.abs_tol)) {
        fint_converged = fint;
        return true;
      }

      // Refactorize only when some quadrature point refreshed its tangent.
      if (fresh_tangents > 0 || !pattern_ready || it == 0) {
        k_ff.resize(nfree, nfree);
        k_ff.setFromTriplets(trips.begin(), trips.end());
        if (!pattern_ready) {
          ldlt.analyzePattern(k_ff);
          pattern_ready = true;
        }
        ldlt.factorize(k_ff);
        if (ldlt.info() != Eigen::Success) return false;
      }
      const Vector du = ldlt.solve(-r);

      // Full step first; backtrack on the residual norm only when needed
      // (plastic branch flips make raw Newton unreliable when much of the
      // section yields).
      const Vector u_old = u;
      bool accepted = false;
      for (int d = 0; d < ndof; ++d)
        if (free_index[d] >= 0) u[d] += du[free_index[d]];
      Vector r2(nfree);
      if (full_assemble(r2, trips) && r2.norm() < rn) {
        r = r2;
        accepted = true;
      } else {
        double step = 0.5;
        for (int ls = 0; ls < 8; ++ls, step *= 0.5) {
          for (int d = 0; d < ndof; ++d)
            if (free_index[d] >= 0) u[d] = u_old[d] + step * du[free_index[d]];
          double rtn;
          if (residual_only(fint, r2, rtn) && rtn < rn) {
            accepted = full_assemble(r, trips);
            break;
          }
        }
      }
      if (!accepted) {
        u = u_old;
        return false;
      }
    }
    return false;
  }

  void solve_to(double ua_target, double ub_target, int depth, bool predict) {
    const double ua0 = ua, ub0 = ub;
    const Vector u0 = u;
    ua = ua_target;
    ub = ub_target;
    apply_dirichlet();
    if (predict && u_prev.size() == u.size()) {
      for (int d = 0; d < ndof; ++d)
        if (free_index[d] >= 0) u[d] += u0[d] - u_prev[d];
    } else if (elastic_ldlt.info() == Eigen::Success) {
      Vector fint(ndof), r(nfree);
      double rn;
      if (residual_only(fint, r, rn)) {
        const Vector du = elastic_ldlt.solve(-r);
        for (int d = 0; d < ndof; ++d)
          if (free_index[d] >= 0) u[d] += du[free_index[d]];
      }
    }
    if (newton_solve()) {
      commit_states();
      return;
    }
    if (depth >= settings.max_bisections)
      throw ConvergenceError("equilibrium solve failed at node " + node_id,
                             settings.max_newton);
    ua = ua0;
    ub = ub0;
    u = u0;
    apply_dirichlet();
    solve_to(0.5 * (ua0 + ua_target), 0.5 * (ub0 + ub_target), depth + 1, false);
    solve_to(ua_target, ub_target, depth + 1, false);
  }

  FieldObservation observe() {
    const Vector& fint = fint_converged;
    FieldObservation obs;
    obs.step = static_cast<int>(node_id.size());
    obs.node_id = node_id;
    const auto& gn = mesh.gauge_nodes;
    obs.disp_x.resize(gn.size());
    obs.disp_y.resize(gn.size());
    for (std::size_t i = 0; i < gn.size(); ++i) {
      obs.disp_x[i] = u[2 * gn[i]];
      obs.disp_y[i] = u[2 * gn[i] + 1];
    }
    // Factor 2: the quarter model carries half of each arm's section.
    obs.load_x = 0.0;
    for (int n : mesh.edge_a) obs.load_x += 2.0 * fint[2 * n];
    obs.load_y = 0.0;
    for (int n : mesh.edge_b) obs.load_y += 2.0 * fint[2 * n + 1];
    return obs;
  }
};

PathSolver::PathSolver(const CruciformMesh& mesh, const material::MaterialParams& params,
                       Settings settings)
    : impl_(std::make_unique<Impl>(mesh, params, settings)) {}
PathSolver::~PathSolver() = default;
PathSolver::PathSolver(PathSolver&&) noexcept = default;

FieldObservation PathSolver::apply_step(char axis) {
  if (axis != 'A' && axis != 'B') throw std::invalid_argument("axis must be A or B");
  Impl& s = *impl_;
  s.node_id += axis;
  const double inc = s.settings.increment;
  const Vector u_entry = s.u;
  const bool predict = axis == s.prev_axis && s.u_prev.size() == s.u.size();
  s.solve_to(s.ua + (axis == 'A' ? inc : 0.0), s.ub + (axis == 'B' ? inc : 0.0), 0,
             predict);
  s.u_prev = u_entry;
  s.prev_axis = axis;
  return s.observe();
}

Eigen::Vector2d PathSolver::constraint_force_balance() const {
  const Impl& s = *impl_;
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  if (s.fint_converged.size() != s.ndof) return sum;
  for (int d = 0; d < s.ndof; ++d)
    if (s.constraint_kind[d] != 0) sum[d % 2] += s.fint_converged[d];
  return sum;
}

PathSolver::Checkpoint PathSolver::checkpoint() const {
  return {impl_->u, impl_->states, impl_->ua, impl_->ub, impl_->node_id};
}

void PathSolver::restore(const Checkpoint& c) {
  impl_->u = c.u;
  impl_->states = c.qp_states;
  impl_->ua = c.ua;
  impl_->ub = c.ub;
  impl_->node_id = c.node_id;
  impl_->prev_axis = 0;
  impl_->u_prev.resize(0);
  std::fill(impl_->hint_valid.begin(), impl_->hint_valid.end(), 0);
}

std::vector<FieldObservation> solve_load_path(const CruciformMesh& mesh,
                                              const material::MaterialParams& params,
                                              const LoadPath& path,
                                              PathSolver::Settings settings) {
  settings.increment = path.increment;
  PathSolver solver(mesh, params, settings);
  std::vector<FieldObservation> out;
  out.reserve(path.steps.size());
  for (char axis : path.steps) out.push_back(solver.apply_step(axis));
  return out;
}

std::vector<Eigen::Vector3d> material_point_path(const material::MaterialParams& params,
                                                 const LoadPath& path,
                                                 double strain_increment) {
  if (!(strain_increment > 0)) throw std::invalid_argument("strain increment must be positive");
  material::Tolerances tol;
  material::MaterialState state;
  std::vector<Eigen::Vector3d> out;
  for (char axis : path.steps) {
    Eigen::Vector3d de = Eigen::Vector3d::Zero();
    de[axis == 'A' ? 0 : 1] = strain_increment;
    const auto res = material::plane_stress_update(de, state, params, tol, false);
    state = res.state;
    out.push_back(res.stress);
  }
  return out;
}

std::vector<FieldObservation> synthesize_data(const std::vector<FieldObservation>& clean,
                                              const NoiseSpec& noise) {
  if (!(noise.psi2_disp > 0 && noise.psi2_load > 0))
    throw std::invalid_argument("noise variances must be positive");
  const double sd = std::sqrt(noise.psi2_disp), sl = std::sqrt(noise.psi2_load);
  std::vector<FieldObservation> out = clean;
  for (auto& obs : out) {
    if (obs.noisy) throw std::invalid_argument("observations already noisy");
    std::mt19937_64 rng(derive_seed(noise.seed, "truth-noise", hash_str(obs.node_id)));
    std::normal_distribution<double> n01(0.0, 1.0);
    for (Eigen::Index i = 0; i < obs.disp_x.size(); ++i) obs.disp_x[i] += sd * n01(rng);
    for (Eigen::Index i = 0; i < obs.disp_y.size(); ++i) obs.disp_y[i] += sd * n01(rng);
    obs.load_x += sl * n01(rng);
    obs.load_y += sl * n01(rng);
    obs.noisy = true;
  }
  return out;
}

void write_displacements_csv(const std::string& file,
                             const std::vector<FieldObservation>& obs,
                             const CruciformMesh& mesh) {
  std::ofstream f(file);
  if (!f) throw std::runtime_error("cannot write " + file);
  f << "step,tree_node,node,x,y,disp_x,disp_y\n";
  char buf[256];
  for (const auto& o : obs) {
    for (std::size_t i = 0; i < mesh.gauge_nodes.size(); ++i) {
      const int n = mesh.gauge_nodes[i];
      std::snprintf(buf, sizeof buf, "%d,%s,%d,%.17g,%.17g,%.17g,%.17g\n", o.step,
                    o.node_id.c_str(), n, mesh.nodes[n].x(), mesh.nodes[n].y(),
                    o.disp_x[i], o.disp_y[i]);
      f << buf;
    }
  }
}

void write_loads_csv(const std::string& file, const std::vector<FieldObservation>& obs) {
  std::ofstream f(file);
  if (!f) throw std::runtime_error("cannot write " + file);
  f << "step,tree_node,load_x,load_y\n";
  char buf[128];
  for (const auto& o : obs) {
    std::snprintf(buf, sizeof buf, "%d,%s,%.17g,%.17g\n", o.step, o.node_id.c_str(),
                  o.load_x, o.load_y);
    f << buf;
  }
}

}  // namespace icc::structure
