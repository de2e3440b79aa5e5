#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "icc/surrogate.hpp"
#include "oracles.hpp"

using namespace icc;
using namespace icc::surrogate;

namespace {
// Small bank shared across cases: depth-2 tree, 48 training samples.
const BankBuildResult& tiny_bank() {
  static BankBuildResult result = [] {
    structure::CruciformGeometry g;
    const auto mesh = structure::build_cruciform_mesh(g, 0);
    BankBuildSettings s;
    s.sample_count = 48;
    s.held_out_count = 4;
    s.p = 3;
    s.tree_depth = 2;
    s.seed = 99;
    s.config_hash = "tinybank";
    return build_bank(mesh, material::MaterialParams{}, s);
  }();
  return result;
}
}  // namespace

TEST_CASE("halton samples") {
  const ParameterBounds b = ParameterBounds::defaults();

  SUBCASE("first point hits the radical-inverse offsets") {
    const Matrix h = halton_samples(1, b, 0);
    const Vector frac = (h.row(0).transpose() - b.lower).cwiseQuotient(b.upper - b.lower);
    CHECK(frac[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(frac[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(frac[2] == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(frac[3] == doctest::Approx(1.0 / 7.0).epsilon(1e-14));
  }

  SUBCASE("all points strictly inside the bounds") {
    const Matrix h = halton_samples(400, b, 0);
    for (int i = 0; i < 400; ++i) {
      CHECK((h.row(i).transpose() - b.lower).minCoeff() > 0);
      CHECK((b.upper - h.row(i).transpose()).minCoeff() > 0);
    }
  }

  SUBCASE("lower discrepancy than iid uniform points") {
    const Matrix h01 = halton_unit(400, 4, 0);
    const double dh = oracle::discrepancy_estimate(h01, 4000, 1);
    std::vector<double> uniform;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u01(0, 1);
    for (int rep = 0; rep < 20; ++rep) {
      Matrix m(400, 4);
      for (int i = 0; i < 400; ++i)
        for (int j = 0; j < 4; ++j) m(i, j) = u01(rng);
      uniform.push_back(oracle::discrepancy_estimate(m, 4000, 1));
    }
    std::sort(uniform.begin(), uniform.end());
    CHECK(dh < uniform[10]);  // below the uniform replicates' median
  }

  SUBCASE("skip continues the sequence") {
    const Matrix a = halton_unit(10, 4, 0);
    const Matrix b2 = halton_unit(5, 4, 5);
    CHECK((a.bottomRows(5) - b2).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("gp regression") {
  GpSettings s;

  SUBCASE("constant targets predict the constant") {
    const Matrix x = halton_unit(30, 2, 0);
    const Vector y = Vector::Constant(30, 3.75);
    const GpModel m = GpModel::train(x, y, s);
    const Matrix q = halton_unit(50, 2, 100);
    const Vector pred = m.predict_mean(q);
    CHECK((pred.array() - 3.75).abs().maxCoeff() < 1e-8);
  }

  SUBCASE("interpolation at training inputs with the floor nugget") {
    const Matrix x = halton_unit(40, 3, 0);
    Vector y(40);
    for (int i = 0; i < 40; ++i)
      y[i] = 2.0 + std::sin(3 * x(i, 0)) + x(i, 1) * x(i, 2);
    GpModel m = GpModel::train(x, y, s);
    // pin the nugget at the floor and rebuild alpha with a test-side kernel
    m.log_sn2 = std::log(1e-10);
    Matrix k(40, 40);
    for (int i = 0; i < 40; ++i)
      for (int j = 0; j < 40; ++j) {
        double q = 0;
        for (int d = 0; d < 3; ++d) {
          const double t = (x(i, d) - x(j, d)) / std::exp(m.log_length[d]);
          q += t * t;
        }
        k(i, j) = std::exp(m.log_sf2) * std::exp(-0.5 * q) + (i == j ? 1e-10 : 0.0);
      }
    m.alpha = k.llt().solve(m.targets);
    for (int i = 0; i < 40; ++i)
      CHECK(m.predict_mean(Vector(x.row(i).transpose())) ==
            doctest::Approx(y[i]).epsilon(1e-6));
  }

  SUBCASE("1-D sine fit") {
    Matrix x(30, 1);
    Vector y(30);
    for (int i = 0; i < 30; ++i) {
      x(i, 0) = (i + 0.5) / 30.0;
      y[i] = std::sin(2 * M_PI * x(i, 0));
    }
    const GpModel m = GpModel::train(x, y, s);
    double se = 0;
    for (int k = 0; k <= 200; ++k) {
      Vector q(1);
      q[0] = k / 200.0;
      const double err = m.predict_mean(q) - std::sin(2 * M_PI * q[0]);
      se += err * err;
    }
    CHECK(std::sqrt(se / 201) < 1e-3);
  }

  SUBCASE("near-linear prediction of a linear target") {
    const Matrix x = halton_unit(60, 4, 0);
    Vector y(60);
    for (int i = 0; i < 60; ++i)
      y[i] = 5.0 + 2.0 * x(i, 0) - 1.0 * x(i, 1) + 0.5 * x(i, 2) + 3.0 * x(i, 3);
    const GpModel m = GpModel::train(x, y, s);
    const Matrix q = halton_unit(100, 4, 500);
    double rmse = 0;
    for (int i = 0; i < 100; ++i) {
      const double truth =
          5.0 + 2.0 * q(i, 0) - 1.0 * q(i, 1) + 0.5 * q(i, 2) + 3.0 * q(i, 3);
      const double err = m.predict_mean(Vector(q.row(i).transpose())) - truth;
      rmse += err * err;
    }
    rmse = std::sqrt(rmse / 100);
    CHECK(rmse < 1e-3 * 6.5);  // target range ~6.5
  }

  SUBCASE("deterministic predictions") {
    const Matrix x = halton_unit(25, 2, 0);
    Vector y(25);
    for (int i = 0; i < 25; ++i) y[i] = x(i, 0) * x(i, 0) + 0.3 * x(i, 1);
    const GpModel m1 = GpModel::train(x, y, s);
    const GpModel m2 = GpModel::train(x, y, s);
    Vector q(2);
    q << 0.37, 0.81;
    CHECK(m1.predict_mean(q) == m2.predict_mean(q));
  }

  SUBCASE("too few points fail") {
    CHECK_THROWS_AS(GpModel::train(halton_unit(4, 3, 0), Vector::Ones(4), s),
                    TrainingError);
  }

  SUBCASE("predictive variance shrinks near training data") {
    const Matrix x = halton_unit(40, 2, 0);
    Vector y(40);
    for (int i = 0; i < 40; ++i) y[i] = std::cos(2 * x(i, 0)) + x(i, 1);
    const GpModel m = GpModel::train(x, y, s);
    const double at_train = m.predict_variance(Vector(x.row(0).transpose()));
    Vector far(2);
    far << -2.0, 3.0;
    CHECK(at_train < m.predict_variance(far));
  }
}

TEST_CASE("bank completeness and prediction") {
  const auto& r = tiny_bank();
  const auto& bank = r.bank;

  SUBCASE("every subtree node carries all channels") {
    CHECK(bank.nodes.size() == 3);  // A, AA, AB
    for (const std::string id : {"A", "AA", "AB"}) {
      REQUIRE(bank.has_node(id));
      const auto& nm = bank.node(id);
      CHECK(static_cast<int>(nm.disp_x.size()) == bank.p);
      CHECK(static_cast<int>(nm.disp_y.size()) == bank.p);
      CHECK(nm.basis_x.p == bank.p);
      CHECK(nm.basis_y.p == bank.p);
    }
  }

  SUBCASE("prediction at a training point matches the training data") {
    for (int i : {0, 7, 23}) {
      const Vector theta = r.theta_train.row(i).transpose();
      const auto pred = bank.predict("AA", theta);
      const auto& obs = r.training.at("AA")[i];
      const Vector truth_scores = reduce::project(bank.node("AA").basis_x, obs.disp_x);
      for (int k = 0; k < bank.p; ++k)
        CHECK(pred.scores_x[k] ==
              doctest::Approx(truth_scores[k])
                  .epsilon(1e-4)
                  .scale(std::abs(truth_scores[0])));
      CHECK(pred.load_x == doctest::Approx(obs.load_x).epsilon(1e-4));
      CHECK(pred.load_y == doctest::Approx(obs.load_y).epsilon(1e-4));
    }
  }

  SUBCASE("path dependence is encoded per node") {
    const Vector theta = r.theta_train.row(3).transpose();
    const auto pa = bank.predict("AA", theta);
    const auto pb = bank.predict("AB", theta);
    CHECK(std::abs(pa.load_y - pb.load_y) > 1.0);
  }

  SUBCASE("unknown node is rejected") {
    CHECK_THROWS_AS(bank.predict("BB", r.theta_train.row(0).transpose()),
                    std::invalid_argument);
  }

  SUBCASE("batch prediction agrees with single prediction") {
    const Matrix q = r.theta_held_out;
    const Matrix batch = bank.predict_batch("A", q);
    const auto single = bank.predict("A", Vector(q.row(2).transpose()));
    CHECK((batch.row(2).segment(0, bank.p).transpose() - single.scores_x).norm() <
          1e-12 * single.scores_x.norm());
    CHECK(batch(2, 2 * bank.p) ==
          doctest::Approx(single.load_x).epsilon(1e-11));
  }

  SUBCASE("held-out report covers every channel") {
    CHECK(r.held_out.size() == 3 * 2 * (bank.p + 1));
    for (const auto& e : r.held_out) {
      CHECK(std::isfinite(e.mae));
      CHECK(e.target_range > 0);
      CHECK(e.noise_std > 0);
      // the fast desk surrogates still have to be far under the noise floor
      CHECK(e.mae < e.target_range);
    }
  }
}

TEST_CASE("bank persistence round trip and resume") {
  const auto& r = tiny_bank();
  const std::string dir = "tiny_bank_saved";
  std::filesystem::remove_all(dir);
  r.bank.save(dir);

  const SurrogateBank loaded = SurrogateBank::load(dir);
  CHECK(loaded.p == r.bank.p);
  CHECK(loaded.train_count == r.bank.train_count);
  CHECK(loaded.config_hash == r.bank.config_hash);
  const Vector theta = r.theta_held_out.row(1).transpose();
  for (const std::string id : {"A", "AA", "AB"}) {
    const auto a = r.bank.predict(id, theta).flatten();
    const auto b = loaded.predict(id, theta).flatten();
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  }

  // resume skips retraining: rebuilt channels match the stored files
  structure::CruciformGeometry g;
  const auto mesh = structure::build_cruciform_mesh(g, 0);
  BankBuildSettings s;
  s.sample_count = 48;
  s.held_out_count = 4;
  s.p = 3;
  s.tree_depth = 2;
  s.seed = 99;
  s.config_hash = "tinybank";
  s.resume_dir = dir;
  const auto rebuilt = build_bank(mesh, material::MaterialParams{}, s);
  for (const std::string id : {"A", "AA", "AB"}) {
    const auto a = r.bank.predict(id, theta).flatten();
    const auto b = rebuilt.bank.predict(id, theta).flatten();
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("extrapolation warning counter") {
  const auto& r = tiny_bank();
  const long before = r.bank.extrapolation_count();
  Vector theta = r.theta_train.row(0).transpose();
  theta[0] = r.bank.bounds.upper[0] + 10.0;
  r.bank.predict("A", theta);
  CHECK(r.bank.extrapolation_count() == before + 1);
}
