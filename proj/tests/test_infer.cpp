#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "icc/infer.hpp"
#include "oracles.hpp"

using namespace icc;
using namespace icc::infer;

namespace {
surrogate::SurrogateBank empty_bank() {
  surrogate::SurrogateBank b;
  b.bounds = surrogate::ParameterBounds::defaults();
  b.p = 5;
  return b;
}
}  // namespace

TEST_CASE("truncated-normal prior") {
  const PriorSpec prior = PriorSpec::defaults();
  prior.validate();

  SUBCASE("outside the box has zero density") {
    Vector t = prior.mu;
    t[0] = prior.lb[0] - 1.0;
    CHECK(prior.logpdf(t) == -std::numeric_limits<double>::infinity());
    t = prior.mu;
    t[3] = prior.ub[3] + 0.1;
    CHECK(prior.logpdf(t) == -std::numeric_limits<double>::infinity());
  }

  SUBCASE("interior mean maximizes each coordinate line") {
    const double at_mu = prior.logpdf(prior.mu);
    for (int d = 0; d < prior.dim(); ++d) {
      Vector t = prior.mu;
      t[d] += 0.25 * (prior.ub[d] - prior.mu[d]);
      CHECK(prior.logpdf(t) < at_mu);
      t[d] = prior.mu[d] - 0.25 * (prior.mu[d] - prior.lb[d]);
      CHECK(prior.logpdf(t) < at_mu);
    }
  }

  SUBCASE("density integrates to one over the box") {
    // tensor-product Gauss-Legendre quadrature as the oracle
    std::vector<double> x1, w1;
    oracle::gauss_legendre(24, 0.0, 1.0, x1, w1);
    double integral = 0;
    const Vector range = prior.ub - prior.lb;
    Vector t(4);
    for (int i = 0; i < 24; ++i)
      for (int j = 0; j < 24; ++j)
        for (int k = 0; k < 24; ++k)
          for (int l = 0; l < 24; ++l) {
            t << prior.lb[0] + x1[i] * range[0], prior.lb[1] + x1[j] * range[1],
                prior.lb[2] + x1[k] * range[2], prior.lb[3] + x1[l] * range[3];
            integral += w1[i] * w1[j] * w1[k] * w1[l] * std::exp(prior.logpdf(t));
          }
    integral *= range.prod();
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-6));
  }

  SUBCASE("samples stay inside and match the analytic moments") {
    const Matrix draws = sample_prior(prior, 100000, 12);
    for (int d = 0; d < 4; ++d) {
      CHECK(draws.col(d).minCoeff() >= prior.lb[d]);
      CHECK(draws.col(d).maxCoeff() <= prior.ub[d]);
      const auto tn = prior.marginal(d);
      const double mean = draws.col(d).mean();
      const double se = std::sqrt(tn.variance() / draws.rows());
      CHECK(std::abs(mean - tn.mean()) < 3.0 * se);
    }
    // deterministic per seed
    const Matrix again = sample_prior(prior, 100, 12);
    CHECK((again - Matrix(draws.topRows(100))).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("noise model blocks") {
  // basis from PCA of a random matrix gives orthonormal components
  std::mt19937_64 rng(31);
  std::normal_distribution<double> n01;
  Matrix a(40, 60);
  for (int i = 0; i < 40; ++i)
    for (int j = 0; j < 60; ++j) a(i, j) = n01(rng);
  surrogate::SurrogateBank bank = empty_bank();
  bank.p = 5;
  surrogate::NodeModels nm;
  nm.basis_x = reduce::fit_pca(a, 5);
  nm.basis_y = reduce::fit_pca(2.0 * a, 5);
  bank.nodes.emplace("A", std::move(nm));

  const NoiseModel noise = NoiseModel::build(bank, 4e-6, 582.11);

  SUBCASE("score covariance is psi2 I") {
    const auto& s = noise.score_noise("A", 0);
    CHECK((s.cov - 4e-6 * Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-17);
  }

  SUBCASE("gaussian quadratic form") {
    Vector obs = Vector::Zero(12), pred = Vector::Zero(12);
    const double base = noise.logpdf("A", obs, pred);
    obs[10] += 2.0 * std::sqrt(582.11);  // load_x shifted by 2 sigma
    CHECK(base - noise.logpdf("A", obs, pred) == doctest::Approx(2.0).epsilon(1e-10));
    obs = Vector::Zero(12);
    obs[0] += 3.0 * std::sqrt(4e-6);
    CHECK(base - noise.logpdf("A", obs, pred) == doctest::Approx(4.5).epsilon(1e-9));
  }

  SUBCASE("matched data leaves only the normalization") {
    Vector v = Vector::Zero(12);
    const double expected = -0.5 * (2 * 5 * std::log(4e-6) +
                                    2 * std::log(582.11) + 12 * stats::kLog2Pi);
    CHECK(noise.logpdf("A", v, v) == doctest::Approx(expected).epsilon(1e-9));
  }

  SUBCASE("qoi mask") {
    NoiseModel masked = noise;
    masked.use_load = false;
    Vector obs = Vector::Zero(12), pred = Vector::Zero(12);
    obs[10] = 100.0;  // load perturbation must not matter
    const auto t = masked.logpdf_terms("A", obs, pred);
    CHECK(masked.logpdf("A", obs, pred) == doctest::Approx(t.disp_x + t.disp_y));
  }

  SUBCASE("observation sampling adds the right spread") {
    std::mt19937_64 r2(9);
    Vector pred = Vector::Zero(12);
    stats::RunningMoments load_m, score_m;
    for (int i = 0; i < 20000; ++i) {
      const Vector d = noise.sample_observation("A", pred, r2);
      load_m.add(d[10]);
      score_m.add(d[2]);
    }
    CHECK(load_m.variance() == doctest::Approx(582.11).epsilon(0.05));
    CHECK(score_m.variance() == doctest::Approx(4e-6).epsilon(0.05));
  }
}

TEST_CASE("bounded gaussian posterior") {
  Vector mean(2), lb(2), ub(2);
  mean << 0.5, -0.2;
  lb << -1, -1;
  ub << 1, 1;
  Matrix cov(2, 2);
  cov << 0.09, 0.02, 0.02, 0.04;
  const GaussianPosterior post(mean, cov, lb, ub);

  SUBCASE("draws stay inside the box") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 2000; ++i) {
      const Vector x = post.draw(rng);
      CHECK((x.array() >= lb.array()).all());
      CHECK((x.array() <= ub.array()).all());
    }
  }

  SUBCASE("logpdf integrates to one over the box") {
    std::vector<double> xq, wq;
    oracle::gauss_legendre(60, 0, 1, xq, wq);
    double integral = 0;
    Vector t(2);
    for (int i = 0; i < 60; ++i)
      for (int j = 0; j < 60; ++j) {
        t << lb[0] + xq[i] * (ub[0] - lb[0]), lb[1] + xq[j] * (ub[1] - lb[1]);
        integral += wq[i] * wq[j] * std::exp(post.logpdf(t));
      }
    integral *= (ub - lb).prod();
    CHECK(integral == doctest::Approx(1.0).epsilon(0.01));  // MC box-mass error
  }

  SUBCASE("outside the box density vanishes") {
    Vector t(2);
    t << 1.5, 0.0;
    CHECK(post.logpdf(t) == -std::numeric_limits<double>::infinity());
  }
}

TEST_CASE("map and laplace on a conjugate objective") {
  // 2-D linear-Gaussian posterior with wide bounds
  Vector mu0(2), y(3);
  mu0 << 0.3, -0.4;
  Matrix s0(2, 2), g(3, 2), psi = 0.05 * Matrix::Identity(3, 3);
  s0 << 0.5, 0.1, 0.1, 0.8;
  g << 1.0, 0.5, -0.3, 1.1, 0.7, -0.2;
  y << 0.8, 0.1, 0.4;
  const auto exact = oracle::conjugate_posterior(g, psi, mu0, s0, y);

  auto log_post = [&](const Vector& t) {
    const Vector rp = t - mu0;
    const Vector ry = y - g * t;
    return -0.5 * rp.dot(s0.inverse() * rp) - 0.5 * ry.dot(psi.inverse() * ry);
  };
  Vector lb = Vector::Constant(2, -10), ub = Vector::Constant(2, 10);

  MapSettings ms;
  const Vector map = map_maximize(log_post, lb, ub, ms);
  CHECK((map - exact.mean).cwiseAbs().maxCoeff() < 1e-6);

  const GaussianPosterior lap = laplace_fit(log_post, map, lb, ub);
  CHECK((lap.mean - exact.mean).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((lap.cov - exact.cov).cwiseAbs().maxCoeff() < 1e-6 * exact.cov.norm());
  CHECK(!lap.boundary_warning);
}

TEST_CASE("prior-only map and laplace") {
  const PriorSpec prior = PriorSpec::defaults();
  const auto bank = empty_bank();
  const NoiseModel noise;  // unused with empty data

  const Vector map = map_estimate({}, prior, bank, noise, {});
  CHECK((map - prior.mu).cwiseAbs().maxCoeff() < 1e-4 * (prior.ub - prior.lb).norm());

  const GaussianPosterior post = laplace_posterior({}, prior, bank, noise, {});
  for (int d = 0; d < 4; ++d)
    CHECK(post.cov(d, d) == doctest::Approx(prior.delta2[d]).epsilon(0.01));
}

TEST_CASE("laplace boundary handling") {
  // maximum right at the box edge: step shrinks one-sidedly and warns
  auto log_post = [](const Vector& t) { return t[0] + t[1] * 0.0 - 0.5 * t[1] * t[1]; };
  Vector lb = Vector::Constant(2, -1), ub = Vector::Constant(2, 1);
  Vector at(2);
  at << 1.0, 0.0;  // on the boundary in dimension 0
  const GaussianPosterior post = laplace_fit(log_post, at, lb, ub);
  CHECK(post.boundary_warning);
}

TEST_CASE("adaptive metropolis on a known gaussian") {
  Vector mean(2);
  mean << 1.0, -2.0;
  Matrix cov(2, 2);
  cov << 1.0, 0.6, 0.6, 0.8;
  const Matrix prec = cov.inverse();
  auto log_post = [&](const Vector& t) {
    const Vector r = t - mean;
    return -0.5 * r.dot(prec * r);
  };
  Vector lb = Vector::Constant(2, -30), ub = Vector::Constant(2, 30);
  McmcSettings s;
  s.samples = 60000;
  s.burn_in = 10000;
  s.thin = 5;
  s.seed = 17;
  s.init = mean;
  const Chain chain = mcmc_sample(log_post, lb, ub, s);
  CHECK(chain.samples.rows() == 10000);
  CHECK(!chain.acceptance_warning);

  const PosteriorSummary sum = summarize(chain.samples);
  // autocorrelation-inflated MC error bars (conservative factor 5)
  for (int d = 0; d < 2; ++d) {
    const double se = 5.0 * std::sqrt(cov(d, d) / chain.samples.rows());
    CHECK(std::abs(sum.mean[d] - mean[d]) < 3.0 * se);
    CHECK(sum.variance[d] == doctest::Approx(cov(d, d)).epsilon(0.15));
  }

  // split-half stationarity proxy
  const Eigen::Index half = chain.samples.rows() / 2;
  const Vector m1 = chain.samples.topRows(half).colwise().mean();
  const Vector m2 = chain.samples.bottomRows(half).colwise().mean();
  for (int d = 0; d < 2; ++d) {
    const double se = 5.0 * std::sqrt(cov(d, d) / half);
    CHECK(std::abs(m1[d] - m2[d]) < 3.0 * se);
  }

  // deterministic given the seed
  const Chain again = mcmc_sample(log_post, lb, ub, s);
  CHECK((again.samples.topRows(50) - Matrix(chain.samples.topRows(50)))
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("summaries") {
  SUBCASE("identity covariance") {
    GaussianPosterior p(Vector::Zero(4), Matrix::Identity(4, 4),
                        Vector::Constant(4, -9), Vector::Constant(4, 9));
    const PosteriorSummary s = summarize(p);
    for (int d = 0; d < 4; ++d) CHECK(s.ci_half_width[d] == doctest::Approx(1.96));
    CHECK(s.generalized_variance == doctest::Approx(1.0));
    CHECK((s.correlation - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("determinant cross-check and chain agreement") {
    Matrix cov(3, 3);
    cov << 2.0, 0.3, -0.1, 0.3, 1.5, 0.2, -0.1, 0.2, 0.9;
    GaussianPosterior p(Vector::Zero(3), cov, Vector::Constant(3, -50),
                        Vector::Constant(3, 50));
    const PosteriorSummary s = summarize(p);
    CHECK(s.generalized_variance ==
          doctest::Approx(s.det_from_eigenvalues).epsilon(1e-8));

    // sampling the same gaussian reproduces the summary within MC error
    std::mt19937_64 rng(5);
    Matrix draws(40000, 3);
    for (int i = 0; i < draws.rows(); ++i) draws.row(i) = p.draw(rng).transpose();
    const PosteriorSummary cs = summarize(draws);
    for (int d = 0; d < 3; ++d) {
      CHECK(std::abs(cs.mean[d]) < 3.0 * std::sqrt(cov(d, d) / draws.rows()));
      CHECK(cs.variance[d] == doctest::Approx(s.variance[d]).epsilon(0.05));
    }
  }
}
