#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "icc/structure.hpp"

using namespace icc;
using namespace icc::structure;

namespace {
const CruciformMesh& default_mesh() {
  static CruciformMesh mesh = build_cruciform_mesh(CruciformGeometry{}, 0);
  return mesh;
}

double interior_angle(const Eigen::Vector2d& prev, const Eigen::Vector2d& at,
                      const Eigen::Vector2d& next) {
  const Eigen::Vector2d a = prev - at, b = next - at;
  return std::acos(std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0)) * 180.0 /
         M_PI;
}
}  // namespace

TEST_CASE("default mesh matches the recorded fixture") {
  const auto& m = default_mesh();
  CHECK(m.nodes.size() == 273);
  CHECK(m.elements.size() == 240);
  CHECK(m.gauge_nodes.size() == 212);
  CHECK(m.gauge_nodes.size() >= 200);
  CHECK(m.fillet_segments >= 8);
}

TEST_CASE("refinement quadruples the element count") {
  const auto m0 = build_cruciform_mesh(CruciformGeometry{}, 0);
  const auto m1 = build_cruciform_mesh(CruciformGeometry{}, 1);
  const double ratio = static_cast<double>(m1.elements.size()) /
                       static_cast<double>(m0.elements.size());
  CHECK(ratio > 3.6);
  CHECK(ratio < 4.4);
}

TEST_CASE("element interior angles stay within (10, 170) degrees") {
  const auto& m = default_mesh();
  for (const auto& e : m.elements) {
    for (int i = 0; i < 4; ++i) {
      const double ang = interior_angle(m.nodes[e[(i + 3) % 4]], m.nodes[e[i]],
                                        m.nodes[e[(i + 1) % 4]]);
      CHECK(ang > 10.0);
      CHECK(ang < 170.0);
    }
  }
}

TEST_CASE("degenerate geometry is rejected") {
  CruciformGeometry g;
  g.fillet_radius = g.arm_half_width;  // fillet as wide as the arm
  CHECK_THROWS_AS(build_cruciform_mesh(g, 0), std::invalid_argument);
  g = CruciformGeometry{};
  g.arm_length = g.arm_half_width;  // no room for the arm
  CHECK_THROWS_AS(build_cruciform_mesh(g, 0), std::invalid_argument);
}

TEST_CASE("elastic response is linear and symmetric") {
  const auto& mesh = default_mesh();
  material::MaterialParams mp;
  const double tiny = 1e-4;  // mm, well inside yield

  PathSolver::Settings s;
  s.increment = tiny;
  const auto obs1 = solve_load_path(mesh, mp, {"A", tiny}, s);
  s.increment = 2 * tiny;
  const auto obs2 = solve_load_path(mesh, mp, {"A", 2 * tiny}, s);
  CHECK(obs2[0].load_x == doctest::Approx(2.0 * obs1[0].load_x).epsilon(1e-6));

  // equal accumulated displacements on both axes give equal loads
  s.increment = tiny;
  const auto ab = solve_load_path(mesh, mp, {"AB", tiny}, s);
  CHECK(ab[1].load_x == doctest::Approx(ab[1].load_y).epsilon(1e-6));
}

TEST_CASE("history dependence: identical prefixes, differing continuations") {
  const auto& mesh = default_mesh();
  material::MaterialParams mp;
  const auto aa = solve_load_path(mesh, mp, {"AA", 0.25});
  const auto ab = solve_load_path(mesh, mp, {"AB", 0.25});
  CHECK((aa[0].disp_x - ab[0].disp_x).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(aa[0].load_x == doctest::Approx(ab[0].load_x).epsilon(1e-12));
  CHECK((aa[1].disp_x - ab[1].disp_x).cwiseAbs().maxCoeff() > 1e-4);
  CHECK(std::abs(aa[1].load_y - ab[1].load_y) > 1.0);
}

TEST_CASE("global equilibrium and plastic softening along AAAAA") {
  const auto& mesh = default_mesh();
  material::MaterialParams mp;
  PathSolver solver(mesh, mp, {});
  std::vector<FieldObservation> obs;
  for (int k = 0; k < 5; ++k) {
    obs.push_back(solver.apply_step('A'));
    const Eigen::Vector2d balance = solver.constraint_force_balance();
    CHECK(std::abs(balance[0]) <= 1e-8 * std::abs(obs.back().load_x));
    CHECK(std::abs(balance[1]) <= 1e-8 * std::abs(obs.back().load_x));
  }
  // monotone increasing X load, Y reaction smaller than X load
  for (int k = 1; k < 5; ++k) {
    CHECK(obs[k].load_x > obs[k - 1].load_x);
    CHECK(std::abs(obs[k].load_y) < obs[k].load_x);
  }
  // incremental stiffness after yield is below the elastic one
  PathSolver::Settings tiny_s;
  tiny_s.increment = 1e-4;
  PathSolver el(mesh, mp, tiny_s);
  const double elastic_step_load = el.apply_step('A').load_x * (0.25 / 1e-4);
  for (int k = 1; k < 5; ++k)
    CHECK(obs[k].load_x - obs[k - 1].load_x < elastic_step_load);
}

TEST_CASE("one refinement level changes step-5 loads by < 5%") {
  material::MaterialParams mp;
  const auto m0 = build_cruciform_mesh(CruciformGeometry{}, 0);
  const auto m1 = build_cruciform_mesh(CruciformGeometry{}, 1);
  const auto c0 = solve_load_path(m0, mp, {"AAAAA", 0.25});
  const auto c1 = solve_load_path(m1, mp, {"AAAAA", 0.25});
  CHECK(std::abs(c1[4].load_x - c0[4].load_x) < 0.05 * std::abs(c1[4].load_x));
  CHECK(std::abs(c1[4].load_y - c0[4].load_y) < 0.05 * std::abs(c1[4].load_x));
}

TEST_CASE("material point path") {
  material::MaterialParams mp;

  SUBCASE("single elastic step matches plane-stress elasticity") {
    const double e = 1e-3;
    const auto seq = material_point_path(mp, {"A", 0.0}, e);
    CHECK(seq.size() == 1);
    CHECK(seq[0][0] == doctest::Approx(mp.E * e / (1 - mp.nu * mp.nu)).epsilon(1e-9));
    CHECK(seq[0][1] == doctest::Approx(mp.nu * seq[0][0]).epsilon(1e-6));
  }

  SUBCASE("five plastic steps sit on the yield surface") {
    const double e = 5e-3;
    const auto seq = material_point_path(mp, {"AAAAA", 0.0}, e);
    // replicate the driver to recover the hardening state
    material::MaterialState state;
    material::Tolerances tol;
    for (int k = 0; k < 5; ++k) {
      const auto r = material::plane_stress_update({e, 0, 0}, state, mp, tol, false);
      state = r.state;
      CHECK((r.stress - seq[k]).norm() < 1e-9 * seq[k].norm());
      if (k == 4) {
        REQUIRE(r.plastic);
        material::SymmetricTensor s3;
        s3.v << r.stress[0], r.stress[1], 0, r.stress[2], 0, 0;
        CHECK(std::abs(material::yield_function(s3, state.kappa, mp)) <=
              2e-8 * mp.sigma_y);
      }
    }
  }

  SUBCASE("path dependence") {
    const double e = 4e-3;
    const auto a5 = material_point_path(mp, {"AAAAA", 0.0}, e);
    const auto ab = material_point_path(mp, {"ABABA", 0.0}, e);
    CHECK((a5.back() - ab.back()).norm() > 1.0);
  }

  SUBCASE("invalid increment") {
    CHECK_THROWS_AS(material_point_path(mp, {"A", 0.0}, 0.0), std::invalid_argument);
  }
}

TEST_CASE("synthetic noise") {
  const auto& mesh = default_mesh();
  material::MaterialParams mp;
  const auto clean = solve_load_path(mesh, mp, {"AAA", 0.25});
  NoiseSpec spec;
  spec.seed = 77;

  SUBCASE("determinism and noisy flag") {
    const auto n1 = synthesize_data(clean, spec);
    const auto n2 = synthesize_data(clean, spec);
    for (std::size_t k = 0; k < n1.size(); ++k) {
      CHECK(n1[k].noisy);
      CHECK((n1[k].disp_x - n2[k].disp_x).cwiseAbs().maxCoeff() == 0.0);
      CHECK(n1[k].load_x == n2[k].load_x);
    }
    CHECK_THROWS_AS(synthesize_data(n1, spec), std::invalid_argument);
  }

  SUBCASE("per-node streams make shared prefixes identical") {
    const auto other = solve_load_path(mesh, mp, {"AAB", 0.25});
    const auto n1 = synthesize_data(clean, spec);
    const auto n2 = synthesize_data(other, spec);
    CHECK((n1[1].disp_x - n2[1].disp_x).cwiseAbs().maxCoeff() == 0.0);  // node AA
    CHECK(n1[1].load_y == n2[1].load_y);
    CHECK((n1[2].disp_x - n2[2].disp_x).cwiseAbs().maxCoeff() > 0.0);  // AAA vs AAB
  }

  SUBCASE("sample variance of the injected noise") {
    // accumulate over many nodes: ~212 gauge values x 2 comps x 3 steps
    // repeated over several seeds to pass 1e4 samples
    double sum2 = 0;
    long n = 0;
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      NoiseSpec s2;
      s2.seed = seed;
      const auto noisy = synthesize_data(clean, s2);
      for (std::size_t k = 0; k < noisy.size(); ++k) {
        sum2 += (noisy[k].disp_x - clean[k].disp_x).squaredNorm();
        sum2 += (noisy[k].disp_y - clean[k].disp_y).squaredNorm();
        n += 2 * clean[k].disp_x.size();
      }
    }
    const double var = sum2 / static_cast<double>(n);
    CHECK(n >= 10000);
    CHECK(var == doctest::Approx(4e-6).epsilon(0.05));
  }

  SUBCASE("invalid noise spec") {
    NoiseSpec bad;
    bad.psi2_disp = 0;
    CHECK_THROWS_AS(synthesize_data(clean, bad), std::invalid_argument);
  }
}

TEST_CASE("observation CSV export") {
  const auto& mesh = default_mesh();
  material::MaterialParams mp;
  const auto obs = solve_load_path(mesh, mp, {"AA", 0.25});
  write_displacements_csv("test_disp.csv", obs, mesh);
  write_loads_csv("test_loads.csv", obs);
  std::ifstream d("test_disp.csv"), l("test_loads.csv");
  std::string line;
  long rows = 0;
  std::getline(d, line);
  CHECK(line == "step,tree_node,node,x,y,disp_x,disp_y");
  while (std::getline(d, line)) ++rows;
  CHECK(rows == 2 * static_cast<long>(mesh.gauge_nodes.size()));
  rows = 0;
  while (std::getline(l, line)) ++rows;
  CHECK(rows == 3);  // header + 2 steps
}
