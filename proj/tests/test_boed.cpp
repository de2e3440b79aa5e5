#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "icc/boed.hpp"
#include "icc/pipeline.hpp"

using namespace icc;
using namespace icc::boed;

namespace {

// y = gain * theta + e with iid noise; EIG has the closed form
// 0.5 ln(1 + gain^2 tau^2 / psi^2) for an untruncated normal prior.
class LinearModel : public StepModel {
 public:
  LinearModel(double gain, double noise_var) : gain_(gain), var_(noise_var) {}
  int dim() const override { return 1; }
  Matrix predict_batch(const Matrix& thetas) const override { return gain_ * thetas; }
  double logpdf(const Vector& obs, const Vector& pred) const override {
    return stats::normal_logpdf(obs[0], pred[0], std::sqrt(var_));
  }
  Vector sample_observation(const Vector& pred, std::mt19937_64& rng) const override {
    std::normal_distribution<double> n(pred[0], std::sqrt(var_));
    Vector v(1);
    v[0] = n(rng);
    return v;
  }

 private:
  double gain_, var_;
};

infer::GaussianPosterior wide_prior(double tau2) {
  Vector lb(1), ub(1);
  lb << -8.0 * std::sqrt(tau2);
  ub << 8.0 * std::sqrt(tau2);
  return {Vector::Zero(1), tau2 * Matrix::Identity(1, 1), lb, ub};
}

}  // namespace

TEST_CASE("conjugate stub matches the closed-form EIG") {
  const auto prior = wide_prior(1.0);
  const LinearModel model(1.0, 1.0);
  EigSettings s;
  s.n_outer = 2000;
  s.m_inner = 500;
  s.seed = 4;
  const auto e = estimate_eig(prior, model, s, "conjugate");
  const double exact = 0.5 * std::log(2.0);
  CHECK(std::abs(e.value - exact) <= 3.0 * e.std_error);
  CHECK(e.fallback_count == 0);
  CHECK(e.value + 3.0 * e.std_error >= 0.0);
}

TEST_CASE("zero-information channel gives zero EIG") {
  const auto prior = wide_prior(1.0);
  const LinearModel model(0.0, 1.0);
  EigSettings s;
  s.n_outer = 2000;
  s.m_inner = 500;
  s.seed = 5;
  const auto e = estimate_eig(prior, model, s, "flat");
  CHECK(std::abs(e.value) <= 3.0 * e.std_error);
  CHECK(e.value + 3.0 * e.std_error >= 0.0);
}

TEST_CASE("estimator consistency as N grows") {
  const auto prior = wide_prior(1.0);
  const LinearModel model(1.0, 1.0);
  const double exact = 0.5 * std::log(2.0);
  double prev_se = 1e9;
  for (int n : {100, 1000, 10000}) {
    EigSettings s;
    s.n_outer = n;
    s.m_inner = 500;
    s.seed = 11;
    const auto e = estimate_eig(prior, model, s);
    CHECK(std::abs(e.value - exact) <= 3.0 * e.std_error + 2e-3);  // small M bias
    CHECK(e.std_error < prev_se);
    prev_se = e.std_error;
  }
}

TEST_CASE("inner-loop bias shrinks with M") {
  const auto prior = wide_prior(1.0);
  const LinearModel model(1.0, 1.0);
  EigSettings s50, s1000;
  s50.n_outer = 4000;
  s50.m_inner = 50;
  s50.seed = 6;
  s1000.n_outer = 4000;
  s1000.m_inner = 1000;
  s1000.seed = 6;
  const auto a = estimate_eig(prior, model, s50);
  const auto b = estimate_eig(prior, model, s1000);
  // the nested-MC bias is positive, so the estimate must not rise with M
  CHECK(b.value <= a.value + 3.0 * (a.std_error + b.std_error));
}

TEST_CASE("importance evidence with proposal equal to the prior") {
  const auto prior = wide_prior(1.0);
  const LinearModel model(1.0, 1.0);
  Vector obs(1);
  obs << 0.7;
  // plain inner sum with the same stream
  std::mt19937_64 r1(42), r2(42);
  Matrix thetas(200, 1);
  for (int j = 0; j < 200; ++j) thetas.row(j) = prior.draw(r1).transpose();
  Vector lls(200);
  const Matrix preds = model.predict_batch(thetas);
  for (int j = 0; j < 200; ++j) lls[j] = model.logpdf(obs, preds.row(j).transpose());
  const double plain = stats::log_sum_exp(lls) - std::log(200.0);
  const double is = importance_evidence(obs, model, prior, prior, 200, r2);
  CHECK(is == doctest::Approx(plain).epsilon(1e-12));
}

TEST_CASE("laplace importance sampling recovers a degenerate evidence") {
  // noise so small that no inner sample lands anywhere near the data
  const double psi2 = 1e-12;
  const auto prior = wide_prior(1.0);
  const LinearModel model(1.0, psi2);

  EigSettings plain;
  plain.n_outer = 200;
  plain.m_inner = 200;
  plain.seed = 8;
  plain.use_fallback = false;
  const auto degenerate = estimate_eig(prior, model, plain);
  CHECK(degenerate.degenerate_count > 150);  // nearly every outer sample

  EigSettings hybrid = plain;
  hybrid.use_fallback = true;
  const auto fixed = estimate_eig(prior, model, hybrid);
  CHECK(fixed.fallback_count == fixed.degenerate_count);
  CHECK(std::isfinite(fixed.value));
  const double exact = 0.5 * std::log(1.0 + 1.0 / psi2);
  // rare near-trigger outer samples keep a slightly biased plain term
  CHECK(std::abs(fixed.value - exact) <= 3.0 * fixed.std_error + 1.0);

  // per-sample check against the closed-form evidence
  std::mt19937_64 rng(3);
  Vector theta0 = prior.draw(rng);
  Vector d = model.sample_observation(model.predict(theta0), rng);
  const auto ev = laplace_importance_evidence(d, theta0, model, prior, 500, rng);
  REQUIRE(ev.has_value());
  // evidence of y ~ N(0, tau^2 + psi^2), nearly exact up to the box mass
  const double exact_ev = stats::normal_logpdf(d[0], 0.0, std::sqrt(1.0 + psi2));
  CHECK(*ev == doctest::Approx(exact_ev).epsilon(0.02));
}

TEST_CASE("selection prefers the informative candidate") {
  const auto prior = wide_prior(1.0);
  const LinearModel informative(1.0, 1.0), flat(0.0, 1.0);
  EigSettings s;
  s.n_outer = 1000;
  s.m_inner = 300;
  s.seed = 19;
  auto r = select_between(prior, informative, flat, s);
  CHECK(r.axis == 'A');
  CHECK(!r.tie);
  r = select_between(prior, flat, informative, s);
  CHECK(r.axis == 'B');
  // two flats tie and break toward A
  r = select_between(prior, flat, flat, s);
  CHECK(r.tie);
  CHECK(r.axis == 'A');
}

TEST_CASE("depth-2 icc run on a tiny bank") {
  structure::CruciformGeometry g;
  const auto mesh = structure::build_cruciform_mesh(g, 0);
  surrogate::BankBuildSettings bs;
  bs.sample_count = 48;
  bs.held_out_count = 0;
  bs.p = 3;
  bs.tree_depth = 2;
  bs.seed = 123;
  bs.config_hash = "icc-tiny";
  const auto built = surrogate::build_bank(mesh, material::MaterialParams{}, bs);

  config::RunConfig cfg;
  cfg.tree_depth = 2;
  cfg.seed = 123;
  const auto truth = pipeline::generate_truth(cfg);
  pipeline::MapTruthSource source(truth);

  const auto noise = infer::NoiseModel::build(built.bank, 4e-6, 582.11);
  IccSettings is;
  is.depth = 2;
  is.eig.n_outer = 400;
  is.eig.m_inner = 150;
  is.seed = 9;
  const IccResult result = run_icc(source, built.bank, infer::PriorSpec::defaults(),
                                   noise, is);

  CHECK(result.path.size() == 2);
  CHECK(result.path[0] == 'A');
  REQUIRE(result.steps.size() == 2);
  CHECK(result.steps[0].selection.has_value());
  CHECK(!result.steps[1].selection.has_value());
  CHECK(result.steps[0].wall_seconds > 0);
  CHECK(result.path[1] == result.steps[0].selection->axis);
  // theta_true within the final 95% intervals on this easy 2-step problem
  Vector theta_true(4);
  theta_true << 293.1, 94.0, 14.35, 11.19;
  const auto& sum = result.final_summary;
  for (int d = 0; d < 4; ++d)
    CHECK(std::abs(theta_true[d] - sum.mean[d]) <= 2.0 * sum.ci_half_width[d]);
}

TEST_CASE("T=1 run performs a single calibration without EIG") {
  structure::CruciformGeometry g;
  const auto mesh = structure::build_cruciform_mesh(g, 0);
  surrogate::BankBuildSettings bs;
  bs.sample_count = 40;
  bs.held_out_count = 0;
  bs.p = 3;
  bs.tree_depth = 1;
  bs.seed = 321;
  bs.config_hash = "icc-t1";
  const auto built = surrogate::build_bank(mesh, material::MaterialParams{}, bs);

  config::RunConfig cfg;
  cfg.tree_depth = 1;
  cfg.seed = 321;
  const auto truth = pipeline::generate_truth(cfg);
  pipeline::MapTruthSource source(truth);
  const auto noise = infer::NoiseModel::build(built.bank, 4e-6, 582.11);
  IccSettings is;
  is.depth = 1;
  const IccResult result = run_icc(source, built.bank, infer::PriorSpec::defaults(),
                                   noise, is);
  CHECK(result.path == "A");
  CHECK(!result.steps[0].selection.has_value());
}
