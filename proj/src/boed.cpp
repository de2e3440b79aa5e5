#include "icc/boed.hpp"

#include <chrono>
#include <cmath>

#include "icc/optimize.hpp"

namespace icc::boed {

// ---------------------------------------------------------- bank adapter --

BankStepModel::BankStepModel(const surrogate::SurrogateBank& bank,
                             const infer::NoiseModel& noise, std::string node_id)
    : bank_(bank), noise_(noise), node_(std::move(node_id)) {
  if (!bank.has_node(node_)) throw std::invalid_argument("bank has no node " + node_);
}

int BankStepModel::dim() const { return 2 * bank_.p + 2; }

Matrix BankStepModel::predict_batch(const Matrix& thetas) const {
  return bank_.predict_batch(node_, thetas);
}

double BankStepModel::logpdf(const Vector& obs, const Vector& pred) const {
  return noise_.logpdf(node_, obs, pred);
}

Vector BankStepModel::sample_observation(const Vector& pred, std::mt19937_64& rng) const {
  return noise_.sample_observation(node_, pred, rng);
}

// ------------------------------------------------------------------- eig --

double importance_evidence(const Vector& observation, const StepModel& model,
                           const infer::ParameterSampler& prior,
                           const infer::ParameterSampler& proposal, int m_inner,
                           std::mt19937_64& rng) {
  Matrix thetas(m_inner, prior.dim());
  for (int j = 0; j < m_inner; ++j) thetas.row(j) = proposal.draw(rng).transpose();
  const Matrix preds = model.predict_batch(thetas);
  Vector terms(m_inner);
  for (int j = 0; j < m_inner; ++j) {
    const Vector th = thetas.row(j).transpose();
    terms[j] = model.logpdf(observation, preds.row(j).transpose()) + prior.logpdf(th) -
               proposal.logpdf(th);
  }
  return stats::log_sum_exp(terms) - std::log(static_cast<double>(m_inner));
}

std::optional<double> laplace_importance_evidence(const Vector& observation,
                                                  const Vector& theta_start,
                                                  const StepModel& model,
                                                  const infer::ParameterSampler& prior,
                                                  int m_inner, std::mt19937_64& rng) {
  const Vector lb = prior.lower(), ub = prior.upper();
  auto log_post = [&](const Vector& theta) {
    const double lp = prior.logpdf(theta);
    if (!std::isfinite(lp)) return lp;
    return lp + model.logpdf(observation, model.predict(theta));
  };
  try {
    infer::MapSettings ms;
    ms.starts = 4;
    ms.max_iterations = 60;
    const Vector theta_map = infer::map_maximize(log_post, lb, ub, ms, {theta_start});
    const infer::GaussianPosterior proposal =
        infer::laplace_fit(log_post, theta_map, lb, ub);
    return importance_evidence(observation, model, prior, proposal, m_inner, rng);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

EigEstimate estimate_eig(const infer::ParameterSampler& sampling, const StepModel& model,
                         const EigSettings& s, const std::string& node_id) {
  if (s.n_outer < 1 || s.m_inner < 1) throw std::invalid_argument("eig: N, M must be >= 1");

  struct Term {
    double value = 0;
    bool degenerate = false;
    bool fallback = false;
    bool excluded = false;
  };
  std::vector<Term> terms(s.n_outer);

  parallel_for(
      s.n_outer,
      [&](std::size_t i) {
        std::mt19937_64 rng_outer(derive_seed(s.seed, "eig-outer", i));
        const Vector theta0 = sampling.draw(rng_outer);
        const Vector pred0 = model.predict(theta0);
        const Vector d = model.sample_observation(pred0, rng_outer);
        const double outer_ll = model.logpdf(d, pred0);

        std::mt19937_64 rng_inner(derive_seed(s.seed, "eig-inner", i));
        Matrix thetas(s.m_inner, sampling.dim());
        for (int j = 0; j < s.m_inner; ++j)
          thetas.row(j) = sampling.draw(rng_inner).transpose();
        const Matrix preds = model.predict_batch(thetas);
        Vector lls(s.m_inner);
        for (int j = 0; j < s.m_inner; ++j)
          lls[j] = model.logpdf(d, preds.row(j).transpose());

        Term& t = terms[i];
        t.degenerate = lls.maxCoeff() < outer_ll - s.underflow_gap;
        if (t.degenerate && s.use_fallback) {
          std::mt19937_64 rng_fb(derive_seed(s.seed, "eig-fallback", i));
          const auto ev =
              laplace_importance_evidence(d, theta0, model, sampling, s.m_inner, rng_fb);
          if (ev) {
            t.value = outer_ll - *ev;
            t.fallback = true;
          } else {
            t.excluded = true;
          }
        } else {
          const double log_ev =
              stats::log_sum_exp(lls) - std::log(static_cast<double>(s.m_inner));
          t.value = outer_ll - log_ev;
        }
      },
      s.threads > 0 ? s.threads : default_threads());

  EigEstimate e;
  e.node_id = node_id;
  stats::RunningMoments rm;
  for (const Term& t : terms) {  // index order keeps the reduction deterministic
    if (t.degenerate) ++e.degenerate_count;
    if (t.fallback) ++e.fallback_count;
    if (t.excluded) {
      ++e.excluded_count;
      continue;
    }
    rm.add(t.value);
  }
  if (rm.n == 0) throw std::runtime_error("eig: every outer sample degenerated");
  e.value = rm.mean;
  e.std_error = rm.stderr_mean();
  return e;
}

// --------------------------------------------------------------- selection --

SelectionResult select_between(const infer::ParameterSampler& posterior,
                               const StepModel& model_a, const StepModel& model_b,
                               const EigSettings& settings, const std::string& name_a,
                               const std::string& name_b) {
  auto estimate = [&](const StepModel& model,
                      const std::string& name) -> std::optional<EigEstimate> {
    try {
      EigSettings s = settings;
      s.seed = derive_seed(settings.seed, "eig-candidate", hash_str(name));
      return estimate_eig(posterior, model, s, name);
    } catch (const std::exception&) {
      return std::nullopt;
    }
  };
  const auto ea = estimate(model_a, name_a);
  const auto eb = estimate(model_b, name_b);
  if (!ea && !eb)
    throw std::runtime_error("EIG failed for both candidates " + name_a + ", " + name_b);

  SelectionResult r;
  if (ea) r.eig_a = *ea;
  if (eb) r.eig_b = *eb;
  if (!eb) {
    r.axis = 'A';
  } else if (!ea) {
    r.axis = 'B';
  } else {
    r.tie = std::abs(ea->value - eb->value) <= ea->std_error + eb->std_error;
    r.axis = r.tie ? 'A' : (ea->value >= eb->value ? 'A' : 'B');
  }
  return r;
}

SelectionResult select_next_step(const infer::ParameterSampler& posterior,
                                 const std::string& current_node,
                                 const surrogate::SurrogateBank& bank,
                                 const infer::NoiseModel& noise,
                                 const EigSettings& settings) {
  const pathtree::LoadPathTree tree{bank.tree_depth};
  const auto [child_a, child_b] = pathtree::children(tree, current_node);
  return select_between(posterior, BankStepModel(bank, noise, child_a),
                        BankStepModel(bank, noise, child_b), settings, child_a,
                        child_b);
}

// ------------------------------------------------------------------- icc --

reduce::ReducedObservation reduce_observation(const structure::FieldObservation& obs,
                                              const surrogate::NodeModels& models) {
  reduce::ReducedObservation r;
  r.node_id = obs.node_id;
  r.scores_x = reduce::project(models.basis_x, obs.disp_x);
  r.scores_y = reduce::project(models.basis_y, obs.disp_y);
  r.load_x = obs.load_x;
  r.load_y = obs.load_y;
  return r;
}

IccResult run_icc(const TruthSource& truth, const surrogate::SurrogateBank& bank,
                  const infer::PriorSpec& prior, const infer::NoiseModel& noise,
                  const IccSettings& settings) {
  using clock = std::chrono::steady_clock;
  IccResult result;
  std::vector<reduce::ReducedObservation> data;
  std::string node;
  char next_axis = settings.first_step;
  std::optional<Vector> prev_map;

  for (int t = 1; t <= settings.depth; ++t) {
    const auto t0 = clock::now();
    node += next_axis;
    const structure::FieldObservation obs = truth.observation(node);
    data.push_back(reduce_observation(obs, bank.node(node)));

    infer::LaplaceSettings ls = settings.laplace;
    ls.map.extra_start = prev_map;
    ls.map.seed = derive_seed(settings.seed, "icc-map", t);
    IccStep step;
    step.node = node;
    step.posterior = infer::laplace_posterior(data, prior, bank, noise, ls);
    prev_map = step.posterior.mean;

    if (t < settings.depth) {
      EigSettings es = settings.eig;
      es.seed = derive_seed(settings.seed, "icc-step", t);
      step.selection = select_next_step(step.posterior, node, bank, noise, es);
      next_axis = step.selection->axis;
    }
    step.wall_seconds = std::chrono::duration<double>(clock::now() - t0).count();
    result.steps.push_back(std::move(step));
  }
  result.path = node;
  result.final_summary = infer::summarize(result.steps.back().posterior);
  return result;
}

}  // namespace icc::boed
