#include "icc/infer.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "icc/optimize.hpp"

namespace icc::infer {

// ------------------------------------------------------------------ prior --

PriorSpec PriorSpec::defaults() {
  // Table-3 settings, converted to MPa where the table uses ksi.
  PriorSpec p;
  p.mu.resize(4);
  p.delta2.resize(4);
  p.mu << 40.0 * kKsiToMPa, 10.0 * kKsiToMPa, 10.0, 10.0;
  p.delta2 << 225.0 * kKsiToMPa * kKsiToMPa, 225.0 * kKsiToMPa * kKsiToMPa, 225.0, 225.0;
  const surrogate::ParameterBounds b = surrogate::ParameterBounds::defaults();
  p.lb = b.lower;
  p.ub = b.upper;
  return p;
}

void PriorSpec::validate() const {
  if (mu.size() != delta2.size() || mu.size() != lb.size() || mu.size() != ub.size())
    throw std::invalid_argument("prior: dimension mismatch");
  for (int d = 0; d < dim(); ++d) {
    if (!(delta2[d] > 0)) throw std::invalid_argument("prior: variances must be positive");
    if (!(lb[d] < ub[d])) throw std::invalid_argument("prior: lb must be < ub");
  }
}

Vector PriorSpec::draw(std::mt19937_64& rng) const {
  Vector t(dim());
  for (int d = 0; d < dim(); ++d) t[d] = marginal(d).sample(rng);
  return t;
}

double PriorSpec::logpdf(const Vector& theta) const {
  double lp = 0;
  for (int d = 0; d < dim(); ++d) lp += marginal(d).logpdf(theta[d]);
  return lp;
}

Matrix sample_prior(const PriorSpec& prior, int count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("sample_prior: count must be positive");
  std::mt19937_64 rng(derive_seed(seed, "prior-draws"));
  Matrix out(count, prior.dim());
  for (int i = 0; i < count; ++i) out.row(i) = prior.draw(rng).transpose();
  return out;
}

// ------------------------------------------------------------------ noise --

NoiseModel NoiseModel::build(const surrogate::SurrogateBank& bank, double psi2_disp,
                             double psi2_load) {
  if (!(psi2_disp > 0 && psi2_load > 0))
    throw std::invalid_argument("noise variances must be positive");
  NoiseModel n;
  n.psi2_disp = psi2_disp;
  n.psi2_load = psi2_load;
  n.p = bank.p;
  for (const auto& [id, nm] : bank.nodes) {
    std::array<ScoreNoise, 2> sn;
    for (int c = 0; c < 2; ++c) {
      const reduce::PcaBasis& b = c == 0 ? nm.basis_x : nm.basis_y;
      ScoreNoise& s = sn[c];
      s.cov = reduce::transform_noise_covariance(b, psi2_disp);
      Eigen::LLT<Matrix> llt(s.cov);
      if (llt.info() != Eigen::Success)
        throw std::runtime_error("score noise covariance not positive definite");
      s.chol = llt.matrixL();
      s.inv = llt.solve(Matrix::Identity(b.p, b.p));
      s.logdet = 0;
      for (int i = 0; i < b.p; ++i) s.logdet += 2.0 * std::log(s.chol(i, i));
    }
    n.per_node_.emplace(id, std::move(sn));
  }
  return n;
}

const NoiseModel::ScoreNoise& NoiseModel::score_noise(const std::string& node,
                                                      int comp) const {
  auto it = per_node_.find(node);
  if (it == per_node_.end()) throw std::invalid_argument("noise model has no node " + node);
  return it->second[comp];
}

NoiseModel::QoiTerms NoiseModel::logpdf_terms(const std::string& node, const Vector& obs,
                                              const Vector& pred) const {
  QoiTerms t;
  auto block = [&](int offset, const ScoreNoise& s) {
    const Vector r = obs.segment(offset, p) - pred.segment(offset, p);
    return -0.5 * r.dot(s.inv * r) - 0.5 * (s.logdet + p * stats::kLog2Pi);
  };
  t.disp_x = block(0, score_noise(node, 0));
  t.disp_y = block(p, score_noise(node, 1));
  t.load_x = stats::normal_logpdf(obs[2 * p], pred[2 * p], std::sqrt(psi2_load));
  t.load_y = stats::normal_logpdf(obs[2 * p + 1], pred[2 * p + 1], std::sqrt(psi2_load));
  return t;
}

double NoiseModel::logpdf(const std::string& node, const Vector& obs,
                          const Vector& pred) const {
  const QoiTerms t = logpdf_terms(node, obs, pred);
  double ll = 0;
  if (use_disp) ll += t.disp_x + t.disp_y;
  if (use_load) ll += t.load_x + t.load_y;
  return ll;
}

Vector NoiseModel::sample_observation(const std::string& node, const Vector& pred,
                                      std::mt19937_64& rng) const {
  std::normal_distribution<double> n01(0.0, 1.0);
  Vector out = pred;
  for (int c = 0; c < 2; ++c) {
    const ScoreNoise& s = score_noise(node, c);
    Vector z(p);
    for (int i = 0; i < p; ++i) z[i] = n01(rng);
    out.segment(c * p, p) += s.chol * z;
  }
  out[2 * p] += std::sqrt(psi2_load) * n01(rng);
  out[2 * p + 1] += std::sqrt(psi2_load) * n01(rng);
  return out;
}

// -------------------------------------------------------------- posterior --

GaussianPosterior::GaussianPosterior(Vector m, Matrix c, Vector l, Vector u)
    : mean(std::move(m)), cov(std::move(c)), lb(std::move(l)), ub(std::move(u)) {}

void GaussianPosterior::ensure() const {
  if (ready_) return;
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("posterior covariance not positive definite");
  chol_ = llt.matrixL();
  log_det_ = 0;
  for (Eigen::Index i = 0; i < cov.rows(); ++i) log_det_ += 2.0 * std::log(chol_(i, i));

  // Box mass by fixed-seed Monte Carlo; no closed form in D > 1.
  const int kDraws = 1 << 16;
  std::mt19937_64 rng(0x1cc0b0f5u);
  std::normal_distribution<double> n01(0.0, 1.0);
  int inside = 0;
  Vector z(mean.size());
  for (int i = 0; i < kDraws; ++i) {
    for (Eigen::Index d = 0; d < z.size(); ++d) z[d] = n01(rng);
    const Vector x = mean + chol_ * z;
    if ((x.array() >= lb.array()).all() && (x.array() <= ub.array()).all()) ++inside;
  }
  log_box_mass_ = std::log(std::max(1, inside) / static_cast<double>(kDraws));
  ready_ = true;
}

const Matrix& GaussianPosterior::cholesky() const {
  ensure();
  return chol_;
}

double GaussianPosterior::log_box_mass() const {
  ensure();
  return log_box_mass_;
}

Vector GaussianPosterior::draw(std::mt19937_64& rng) const {
  ensure();
  std::normal_distribution<double> n01(0.0, 1.0);
  Vector z(mean.size());
  for (int tries = 0; tries < 100000; ++tries) {
    for (Eigen::Index d = 0; d < z.size(); ++d) z[d] = n01(rng);
    const Vector x = mean + chol_ * z;
    if ((x.array() >= lb.array()).all() && (x.array() <= ub.array()).all()) return x;
  }
  throw std::runtime_error("bounded posterior sampling: box mass too small");
}

double GaussianPosterior::logpdf(const Vector& theta) const {
  if ((theta.array() < lb.array()).any() || (theta.array() > ub.array()).any())
    return -std::numeric_limits<double>::infinity();
  ensure();
  const Vector r = theta - mean;
  const Vector w = chol_.triangularView<Eigen::Lower>().solve(r);
  return -0.5 * w.squaredNorm() - 0.5 * log_det_ -
         0.5 * static_cast<double>(mean.size()) * stats::kLog2Pi - log_box_mass_;
}

// ------------------------------------------------------------- likelihood --

double log_likelihood(const std::vector<reduce::ReducedObservation>& data,
                      const Vector& theta, const surrogate::SurrogateBank& bank,
                      const NoiseModel& noise) {
  double ll = 0;
  for (const auto& obs : data) {
    const reduce::ReducedObservation pred = bank.predict(obs.node_id, theta);
    ll += noise.logpdf(obs.node_id, obs.flatten(), pred.flatten());
  }
  return ll;
}

// -------------------------------------------------------------------- map --

namespace {
struct PosteriorObjective {
  const std::vector<reduce::ReducedObservation>& data;
  const PriorSpec& prior;
  const surrogate::SurrogateBank& bank;
  const NoiseModel& noise;

  double log_post(const Vector& theta) const {
    const double lp = prior.logpdf(theta);
    if (!std::isfinite(lp)) return lp;
    return lp + log_likelihood(data, theta, bank, noise);
  }
};
}  // namespace

Vector map_maximize(const std::function<double(const Vector&)>& log_post,
                    const Vector& lb, const Vector& ub, const MapSettings& settings,
                    const std::vector<Vector>& extra_starts) {
  const int d = static_cast<int>(lb.size());
  const Vector range = ub - lb;
  auto to_theta = [&](const Vector& z) { return Vector(lb + z.cwiseProduct(range)); };
  auto neg = [&](const Vector& z) { return -log_post(to_theta(z)); };

  std::vector<Vector> starts;
  const Matrix h = surrogate::halton_unit(settings.starts, d, 0);
  for (int i = 0; i < settings.starts; ++i) starts.push_back(h.row(i).transpose());
  for (const Vector& t : extra_starts)
    starts.push_back(((t - lb).cwiseQuotient(range)).cwiseMax(0.0).cwiseMin(1.0));

  const Vector zlb = Vector::Zero(d), zub = Vector::Ones(d);
  double best_f = std::numeric_limits<double>::infinity();
  double best_start_f = std::numeric_limits<double>::infinity();
  Vector best_z;
  bool any_converged = false;
  for (const Vector& z0 : starts) {
    best_start_f = std::min(best_start_f, neg(z0));
    opt::Options o;
    o.max_iter = settings.max_iterations;
    o.fd_step = 1e-6;
    const auto r = opt::minimize(neg, z0, zlb, zub, o);
    any_converged = any_converged || r.converged;
    if (r.f < best_f) {
      best_f = r.f;
      best_z = r.x;
    }
  }
  if (!best_z.size() || (!any_converged && best_f > best_start_f - 1e-12)) {
    throw ConvergenceError("MAP search failed: no start improved (best objective " +
                               std::to_string(best_f) + ")",
                           settings.max_iterations);
  }
  return to_theta(best_z);
}

Vector map_estimate(const std::vector<reduce::ReducedObservation>& data,
                    const PriorSpec& prior, const surrogate::SurrogateBank& bank,
                    const NoiseModel& noise, const MapSettings& settings) {
  prior.validate();
  PosteriorObjective obj{data, prior, bank, noise};
  std::vector<Vector> extras{prior.mu};
  if (settings.extra_start) extras.push_back(*settings.extra_start);
  return map_maximize([&](const Vector& t) { return obj.log_post(t); }, prior.lb,
                      prior.ub, settings, extras);
}

// ---------------------------------------------------------------- laplace --

GaussianPosterior laplace_fit(const std::function<double(const Vector&)>& log_post,
                              const Vector& theta_map, const Vector& lb,
                              const Vector& ub, double fd_step) {
  const int d = static_cast<int>(theta_map.size());
  const Vector range = ub - lb;
  const Vector z0 = (theta_map - lb).cwiseQuotient(range);
  auto f = [&](const Vector& z) { return -log_post(Vector(lb + z.cwiseProduct(range))); };

  bool boundary = false;
  Vector h(d);
  for (int i = 0; i < d; ++i) {
    h[i] = std::min({fd_step, std::max(z0[i], 1e-7), std::max(1.0 - z0[i], 1e-7)});
    if (h[i] < fd_step) boundary = true;
  }

  const double f0 = f(z0);
  Matrix hess(d, d);
  for (int i = 0; i < d; ++i) {
    Vector zp = z0, zm = z0;
    zp[i] += h[i];
    zm[i] -= h[i];
    hess(i, i) = (f(zp) + f(zm) - 2.0 * f0) / (h[i] * h[i]);
    for (int j = i + 1; j < d; ++j) {
      Vector zpp = z0, zpm = z0, zmp = z0, zmm = z0;
      zpp[i] += h[i];
      zpp[j] += h[j];
      zpm[i] += h[i];
      zpm[j] -= h[j];
      zmp[i] -= h[i];
      zmp[j] += h[j];
      zmm[i] -= h[i];
      zmm[j] -= h[j];
      hess(i, j) = hess(j, i) =
          (f(zpp) - f(zpm) - f(zmp) + f(zmm)) / (4.0 * h[i] * h[j]);
    }
  }

  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (hess + hess.transpose()));
  const Vector ev = es.eigenvalues();
  const double ev_max = ev.maxCoeff();
  if (ev_max <= 0 || ev.minCoeff() < -0.1 * ev_max) {
    std::string msg = "Laplace Hessian indefinite; eigenvalues:";
    for (int i = 0; i < d; ++i) msg += " " + std::to_string(ev[i]);
    throw std::runtime_error(msg);
  }
  bool floored = false;
  Vector inv_ev(d);
  for (int i = 0; i < d; ++i) {
    double lam = ev[i];
    if (lam <= 0) {
      lam = 1e12;  // yields the 1e-12 floor on the covariance eigenvalue
      floored = true;
    }
    inv_ev[i] = 1.0 / lam;
  }
  Matrix cov_z = es.eigenvectors() * inv_ev.asDiagonal() * es.eigenvectors().transpose();
  Matrix cov = range.asDiagonal() * cov_z * range.asDiagonal();
  cov = 0.5 * (cov + cov.transpose());

  // Enforce the covariance eigenvalue floor after scaling as well.
  Eigen::SelfAdjointEigenSolver<Matrix> es2(cov);
  if (es2.eigenvalues().minCoeff() < 1e-12) {
    Vector fixed = es2.eigenvalues().cwiseMax(1e-12);
    cov = es2.eigenvectors() * fixed.asDiagonal() * es2.eigenvectors().transpose();
    floored = true;
  }

  GaussianPosterior post(theta_map, cov, lb, ub);
  post.boundary_warning = boundary;
  post.eigenvalue_floored = floored;
  return post;
}

GaussianPosterior laplace_posterior(const std::vector<reduce::ReducedObservation>& data,
                                    const PriorSpec& prior,
                                    const surrogate::SurrogateBank& bank,
                                    const NoiseModel& noise,
                                    const LaplaceSettings& settings) {
  const Vector theta_map = map_estimate(data, prior, bank, noise, settings.map);
  PosteriorObjective obj{data, prior, bank, noise};
  return laplace_fit([&](const Vector& t) { return obj.log_post(t); }, theta_map,
                     prior.lb, prior.ub, settings.fd_step);
}

// ------------------------------------------------------------------- mcmc --

Chain mcmc_sample(const std::function<double(const Vector&)>& log_post,
                  const Vector& lb, const Vector& ub, const McmcSettings& s) {
  const int d = static_cast<int>(lb.size());
  if (s.samples <= s.burn_in) throw std::invalid_argument("mcmc: samples <= burn_in");
  std::mt19937_64 rng(derive_seed(s.seed, "mcmc"));
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  Vector x = s.init ? *s.init : Vector(0.5 * (lb + ub));
  double fx = log_post(x);
  if (!std::isfinite(fx)) throw std::invalid_argument("mcmc: invalid initial point");

  const double sc = 2.38 * 2.38 / d;
  Matrix prop = s.proposal_cov ? *s.proposal_cov
                               : Matrix(((ub - lb) / 100.0).array().square().matrix().asDiagonal());
  Eigen::LLT<Matrix> llt(sc * prop);
  Matrix l = llt.matrixL();

  // Running moments for the burn-in adaptation.
  Vector mean_acc = Vector::Zero(d);
  Matrix m2_acc = Matrix::Zero(d, d);
  long count = 0;

  const int kept_count = (s.samples - s.burn_in) / s.thin;
  Matrix kept(kept_count, d);
  int kept_i = 0;
  long accepted = 0, proposals = 0;

  for (int it = 0; it < s.samples; ++it) {
    Vector z(d);
    for (int k = 0; k < d; ++k) z[k] = n01(rng);
    const Vector y = x + l * z;
    bool in_box = (y.array() >= lb.array()).all() && (y.array() <= ub.array()).all();
    if (in_box) {
      const double fy = log_post(y);
      if (std::log(u01(rng)) < fy - fx) {
        x = y;
        fx = fy;
        if (it >= s.burn_in) ++accepted;
      }
    }
    if (it >= s.burn_in) ++proposals;

    if (it < s.burn_in) {
      ++count;
      const Vector dlt = x - mean_acc;
      mean_acc += dlt / static_cast<double>(count);
      m2_acc += dlt * (x - mean_acc).transpose();
      if (count > 2 * d && count % 100 == 0) {
        Matrix c = m2_acc / static_cast<double>(count - 1);
        c.diagonal().array() += 1e-12 * (ub - lb).array().square();
        Eigen::LLT<Matrix> ll2(sc * c);
        if (ll2.info() == Eigen::Success) l = ll2.matrixL();
      }
    } else if ((it - s.burn_in) % s.thin == 0 && kept_i < kept_count) {
      kept.row(kept_i++) = x.transpose();
    }
  }

  Chain chain;
  chain.samples = kept.topRows(kept_i);
  chain.acceptance_rate = proposals ? static_cast<double>(accepted) / proposals : 0.0;
  chain.acceptance_warning =
      chain.acceptance_rate < 0.05 || chain.acceptance_rate > 0.7;
  return chain;
}

Chain mcmc_sample(const std::vector<reduce::ReducedObservation>& data,
                  const PriorSpec& prior, const surrogate::SurrogateBank& bank,
                  const NoiseModel& noise, const McmcSettings& settings) {
  PosteriorObjective obj{data, prior, bank, noise};
  return mcmc_sample([&](const Vector& t) { return obj.log_post(t); }, prior.lb,
                     prior.ub, settings);
}

// ---------------------------------------------------------------- summary --

namespace {
PosteriorSummary summarize_cov(const Vector& mean, const Matrix& cov) {
  PosteriorSummary s;
  s.mean = mean;
  s.variance = cov.diagonal();
  s.ci_half_width = 1.96 * s.variance.cwiseSqrt();
  s.generalized_variance = cov.determinant();
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  s.det_from_eigenvalues = es.eigenvalues().prod();
  const Vector sd = s.variance.cwiseSqrt();
  s.correlation = cov.array() / (sd * sd.transpose()).array();
  return s;
}
}  // namespace

PosteriorSummary summarize(const GaussianPosterior& posterior) {
  return summarize_cov(posterior.mean, posterior.cov);
}

PosteriorSummary summarize(const Matrix& chain_samples) {
  const Eigen::Index n = chain_samples.rows();
  if (n < 2) throw std::invalid_argument("summarize: need at least 2 samples");
  const Vector mean = chain_samples.colwise().mean();
  const Matrix centered = chain_samples.rowwise() - mean.transpose();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(n - 1);
  return summarize_cov(mean, cov);
}

}  // namespace icc::infer
