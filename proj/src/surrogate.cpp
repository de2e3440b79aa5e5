#include "icc/surrogate.hpp"

#include <Eigen/Cholesky>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <mutex>

#include "icc/jsonio.hpp"
#include "icc/optimize.hpp"
#include "icc/pathtree.hpp"
#include "icc/stats.hpp"

namespace fs = std::filesystem;

namespace icc::surrogate {

using jsonio::json;

// ---------------------------------------------------------------- bounds --

ParameterBounds ParameterBounds::defaults() {
  // Tabulated in ksi for sigma_y and A: [32, 50] and [1, 20].
  ParameterBounds b;
  b.lower << 32.0 * kKsiToMPa, 1.0 * kKsiToMPa, 0.5, 4.0;
  b.upper << 50.0 * kKsiToMPa, 20.0 * kKsiToMPa, 20.0, 16.0;
  return b;
}

void ParameterBounds::validate() const {
  if (lower.size() != upper.size() || lower.size() < 1)
    throw std::invalid_argument("bounds dimension mismatch");
  for (Eigen::Index d = 0; d < lower.size(); ++d)
    if (!(lower[d] < upper[d])) throw std::invalid_argument("bounds: lb must be < ub");
}

Vector ParameterBounds::normalize(const Vector& theta) const {
  return (theta - lower).cwiseQuotient(upper - lower);
}

Vector ParameterBounds::denormalize(const Vector& z) const {
  return lower + z.cwiseProduct(upper - lower);
}

bool ParameterBounds::contains(const Vector& theta) const {
  return (theta.array() >= lower.array()).all() && (theta.array() <= upper.array()).all();
}

// ---------------------------------------------------------------- halton --

namespace {
double radical_inverse(unsigned base, unsigned long long i) {
  double f = 1.0, r = 0.0;
  while (i) {
    f /= base;
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}
const unsigned kHaltonBases[] = {2, 3, 5, 7, 11, 13};
}  // namespace

Matrix halton_unit(int count, int dim, int skip) {
  if (count < 1 || dim < 1 || dim > 6) throw std::invalid_argument("halton_unit arguments");
  Matrix m(count, dim);
  for (int i = 0; i < count; ++i)
    for (int d = 0; d < dim; ++d)
      m(i, d) = radical_inverse(kHaltonBases[d], static_cast<unsigned long long>(skip + i + 1));
  return m;
}

Matrix halton_samples(int count, const ParameterBounds& bounds, int skip) {
  bounds.validate();
  const int d = bounds.dim();
  Matrix u = halton_unit(count, d, skip);
  for (int i = 0; i < count; ++i)
    u.row(i) = bounds.denormalize(u.row(i).transpose()).transpose();
  return u;
}

// -------------------------------------------------------------------- gp --

namespace {

struct KernelWork {
  const Matrix& x;
  std::vector<Matrix> sqdiff;  // per dimension, u x u

  explicit KernelWork(const Matrix& inputs) : x(inputs) {
    const Eigen::Index u = x.rows(), d = x.cols();
    sqdiff.reserve(d);
    for (Eigen::Index k = 0; k < d; ++k) {
      Matrix s(u, u);
      for (Eigen::Index i = 0; i < u; ++i)
        for (Eigen::Index j = 0; j < u; ++j) {
          const double t = x(i, k) - x(j, k);
          s(i, j) = t * t;
        }
      sqdiff.push_back(std::move(s));
    }
  }

  Matrix correlation(const Vector& log_length) const {
    const Eigen::Index u = x.rows();
    Matrix q = Matrix::Zero(u, u);
    for (std::size_t k = 0; k < sqdiff.size(); ++k)
      q += sqdiff[k] * std::exp(-2.0 * log_length[static_cast<Eigen::Index>(k)]);
    return (-0.5 * q.array()).exp();
  }
};

// Negative log marginal likelihood and its gradient over
// eta = [log l_1..D, log sf2, log sn2].
struct LmlObjective {
  const KernelWork& work;
  const Vector& y;

  double value(const Vector& eta, Vector* grad) const {
    const Eigen::Index u = y.size();
    const Eigen::Index d = static_cast<Eigen::Index>(work.sqdiff.size());
    const double sf2 = std::exp(eta[d]), sn2 = std::exp(eta[d + 1]);
    const Matrix r = work.correlation(eta.head(d));
    Matrix k = sf2 * r;
    k.diagonal().array() += sn2;
    Eigen::LLT<Matrix> llt(k);
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    const Vector alpha = llt.solve(y);
    double logdet = 0;
    for (Eigen::Index i = 0; i < u; ++i) logdet += std::log(llt.matrixLLT()(i, i));
    const double f =
        0.5 * y.dot(alpha) + logdet + 0.5 * static_cast<double>(u) * stats::kLog2Pi;
    if (grad) {
      // G = alpha alpha^T - K^-1; d(-lml)/d eta = -0.5 tr(G dK)
      Matrix g = -llt.solve(Matrix::Identity(u, u));
      g.noalias() += alpha * alpha.transpose();
      grad->resize(d + 2);
      for (Eigen::Index kk = 0; kk < d; ++kk) {
        const double il2 = std::exp(-2.0 * eta[kk]);
        (*grad)[kk] =
            -0.5 * sf2 * il2 * (g.array() * r.array() * work.sqdiff[kk].array()).sum();
      }
      (*grad)[d] = -0.5 * sf2 * (g.array() * r.array()).sum();
      (*grad)[d + 1] = -0.5 * sn2 * g.trace();
    }
    return f;
  }
};

}  // namespace

GpModel GpModel::train(const Matrix& inputs, const Vector& targets,
                       const GpSettings& settings) {
  const Eigen::Index u = inputs.rows(), d = inputs.cols();
  if (u < d + 2) throw TrainingError("gp: need at least D+2 training points");
  if (!targets.allFinite()) throw TrainingError("gp: non-finite targets");

  GpModel m;
  m.inputs = inputs;
  m.target_mean = targets.mean();
  const double sd = std::sqrt((targets.array() - m.target_mean).square().sum() /
                              std::max<double>(1, static_cast<double>(u - 1)));
  m.target_scale = std::max(sd, 1e-300);
  m.targets = (targets.array() - m.target_mean) / m.target_scale;

  KernelWork work(inputs);
  LmlObjective obj{work, m.targets};

  Vector lb(d + 2), ub(d + 2);
  lb.head(d).setConstant(std::log(0.05));
  ub.head(d).setConstant(std::log(20.0));
  lb[d] = std::log(1e-6);
  ub[d] = std::log(1e4);
  lb[d + 1] = std::log(settings.nugget_floor);
  ub[d + 1] = std::log(settings.nugget_max);

  auto fval = [&](const Vector& eta) { return obj.value(eta, nullptr); };
  auto fgrad = [&](const Vector& eta) {
    Vector g;
    obj.value(eta, &g);
    return g;
  };

  // Multi-start over log-lengthscale space; every start gets a short
  // optimization run and the best continue to convergence.
  const Matrix starts01 = halton_unit(settings.starts, static_cast<int>(d), 0);
  std::vector<std::pair<double, Vector>> pool;
  for (int s = 0; s < settings.starts; ++s) {
    Vector eta(d + 2);
    for (Eigen::Index k = 0; k < d; ++k)
      eta[k] = lb[k] + starts01(s, k) * (ub[k] - lb[k]);
    eta[d] = 0.0;            // sf2 = 1 on standardized targets
    eta[d + 1] = std::log(1e-8);
    opt::Options o;
    o.max_iter = settings.screen_iterations;
    const auto r = opt::minimize(fval, eta, lb, ub, o, fgrad);
    pool.emplace_back(r.f, r.x);
  }
  std::sort(pool.begin(), pool.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  double best_f = std::numeric_limits<double>::infinity();
  Vector best_eta = pool.front().second;
  for (int i = 0; i < std::min<int>(settings.polish_count, static_cast<int>(pool.size())); ++i) {
    opt::Options o;
    o.max_iter = settings.polish_iterations;
    const auto r = opt::minimize(fval, pool[i].second, lb, ub, o, fgrad);
    if (r.f < best_f) {
      best_f = r.f;
      best_eta = r.x;
    }
  }
  if (!std::isfinite(best_f)) throw TrainingError("gp: marginal likelihood not finite");

  m.log_length = best_eta.head(d);
  m.log_sf2 = best_eta[d];
  m.log_sn2 = best_eta[d + 1];

  // Final factorization with nugget escalation on failure.
  double sn2 = std::exp(m.log_sn2);
  for (;;) {
    Matrix k = std::exp(m.log_sf2) * work.correlation(m.log_length);
    k.diagonal().array() += sn2;
    Eigen::LLT<Matrix> llt(k);
    if (llt.info() == Eigen::Success) {
      m.alpha = llt.solve(m.targets);
      m.chol_ = std::make_shared<Matrix>(llt.matrixL());
      m.log_sn2 = std::log(sn2);
      break;
    }
    sn2 *= 10.0;
    if (sn2 > settings.nugget_max)
      throw TrainingError("gp: kernel not positive definite after nugget escalation");
  }
  return m;
}

namespace {
Matrix cross_kernel(const GpModel& m, const Matrix& xs) {
  // |a-b|^2 = |a|^2 + |b|^2 - 2 a.b on lengthscale-scaled inputs keeps the
  // distance computation a single matrix product.
  const Vector inv_l = (-m.log_length.array()).exp();
  const Matrix a = xs * inv_l.asDiagonal();
  const Matrix b = m.inputs * inv_l.asDiagonal();
  const Vector a2 = a.rowwise().squaredNorm();
  const Vector b2 = b.rowwise().squaredNorm();
  Matrix acc = -2.0 * a * b.transpose();
  acc.colwise() += a2;
  acc.rowwise() += b2.transpose();
  return std::exp(m.log_sf2) *
         (-0.5 * acc.array().max(0.0)).exp().matrix();
}
}  // namespace

double GpModel::predict_mean(const Vector& x) const {
  Matrix xs(1, x.size());
  xs.row(0) = x.transpose();
  return predict_mean(xs)[0];
}

Vector GpModel::predict_mean(const Matrix& xs) const {
  const Matrix kx = cross_kernel(*this, xs);
  return (target_mean + (target_scale * (kx * alpha)).array()).matrix();
}

const Matrix& GpModel::cholesky() const {
  if (!chol_) {
    KernelWork work(inputs);
    Matrix k = std::exp(log_sf2) * work.correlation(log_length);
    k.diagonal().array() += std::exp(log_sn2);
    Eigen::LLT<Matrix> llt(k);
    if (llt.info() != Eigen::Success)
      throw TrainingError("gp: stored kernel not positive definite");
    chol_ = std::make_shared<Matrix>(llt.matrixL());
  }
  return *chol_;
}

double GpModel::predict_variance(const Vector& x) const {
  Matrix xs(1, x.size());
  xs.row(0) = x.transpose();
  const Matrix kx = cross_kernel(*this, xs);
  const Matrix& l = cholesky();
  const Vector v = l.triangularView<Eigen::Lower>().solve(kx.row(0).transpose());
  const double lat = std::exp(log_sf2) - v.squaredNorm();
  return std::max(0.0, lat) * target_scale * target_scale;
}

// ------------------------------------------------------------------ bank --

namespace {
std::atomic<long> g_extrapolations{0};

json gp_to_json(const GpModel& m, const std::string& config_hash) {
  json j;
  j["format_version"] = 1;
  j["config_hash"] = config_hash;
  j["inputs"] = jsonio::from_matrix(m.inputs);
  j["targets"] = jsonio::from_vector(m.targets);
  j["log_length"] = jsonio::from_vector(m.log_length);
  j["log_sf2"] = m.log_sf2;
  j["log_sn2"] = m.log_sn2;
  j["target_mean"] = m.target_mean;
  j["target_scale"] = m.target_scale;
  j["alpha"] = jsonio::from_vector(m.alpha);
  return j;
}

GpModel gp_from_json(const json& j) {
  GpModel m;
  m.inputs = jsonio::to_matrix(j.at("inputs"));
  m.targets = jsonio::to_vector(j.at("targets"));
  m.log_length = jsonio::to_vector(j.at("log_length"));
  m.log_sf2 = j.at("log_sf2").get<double>();
  m.log_sn2 = j.at("log_sn2").get<double>();
  m.target_mean = j.at("target_mean").get<double>();
  m.target_scale = j.at("target_scale").get<double>();
  m.alpha = jsonio::to_vector(j.at("alpha"));
  return m;
}

json basis_to_json(const reduce::PcaBasis& b, int u) {
  json j;
  j["format_version"] = 1;
  j["node"] = b.node_id;
  j["component"] = b.component;
  j["u"] = u;
  j["v"] = b.field_size();
  j["p"] = b.p;
  j["sign_convention"] = "largest-magnitude-entry-positive";
  j["mean"] = jsonio::from_vector(b.mean);
  j["components"] = jsonio::from_matrix(b.components);
  j["singular_values"] = jsonio::from_vector(b.singular_values);
  j["explained_variance_ratio"] = jsonio::from_vector(b.explained_variance_ratio);
  j["degenerate_rank"] = b.degenerate_rank;
  return j;
}

reduce::PcaBasis basis_from_json(const json& j) {
  reduce::PcaBasis b;
  b.node_id = j.at("node").get<std::string>();
  b.component = j.at("component").get<std::string>();
  b.p = j.at("p").get<int>();
  b.mean = jsonio::to_vector(j.at("mean"));
  b.components = jsonio::to_matrix(j.at("components"));
  b.singular_values = jsonio::to_vector(j.at("singular_values"));
  b.explained_variance_ratio = jsonio::to_vector(j.at("explained_variance_ratio"));
  b.degenerate_rank = j.at("degenerate_rank").get<bool>();
  return b;
}

std::string channel_file(const std::string& dir, const std::string& node,
                         const std::string& comp, const std::string& qoi, int channel) {
  std::string name = qoi;
  if (channel >= 0) name += "_" + std::to_string(channel);
  return dir + "/" + node + "/" + comp + "/" + name + ".gp";
}
}  // namespace

const NodeModels& SurrogateBank::node(const std::string& id) const {
  auto it = nodes.find(id);
  if (it == nodes.end()) throw std::invalid_argument("bank has no node " + id);
  return it->second;
}

reduce::ReducedObservation SurrogateBank::predict(const std::string& node_id,
                                                  const Vector& theta) const {
  const Matrix one = predict_batch(node_id, theta.transpose());
  reduce::ReducedObservation r;
  r.node_id = node_id;
  r.scores_x = one.row(0).segment(0, p).transpose();
  r.scores_y = one.row(0).segment(p, p).transpose();
  r.load_x = one(0, 2 * p);
  r.load_y = one(0, 2 * p + 1);
  return r;
}

Matrix SurrogateBank::predict_batch(const std::string& node_id, const Matrix& thetas) const {
  const NodeModels& nm = node(node_id);
  Matrix z(thetas.rows(), thetas.cols());
  for (Eigen::Index i = 0; i < thetas.rows(); ++i) {
    const Vector th = thetas.row(i).transpose();
    if (!bounds.contains(th)) ++g_extrapolations;
    z.row(i) = bounds.normalize(th).transpose();
  }
  Matrix out(thetas.rows(), 2 * p + 2);
  for (int k = 0; k < p; ++k) {
    out.col(k) = nm.disp_x[k].predict_mean(z);
    out.col(p + k) = nm.disp_y[k].predict_mean(z);
  }
  out.col(2 * p) = nm.load_x.predict_mean(z);
  out.col(2 * p + 1) = nm.load_y.predict_mean(z);
  return out;
}

long SurrogateBank::extrapolation_count() const { return g_extrapolations.load(); }

void SurrogateBank::save(const std::string& dir) const {
  fs::create_directories(dir);
  json manifest;
  manifest["format_version"] = 1;
  manifest["config_hash"] = config_hash;
  manifest["seed"] = seed;
  manifest["train_count"] = train_count;
  manifest["p"] = p;
  manifest["tree_depth"] = tree_depth;
  manifest["first_step"] = std::string(1, first_step);
  manifest["bounds"]["lower"] = jsonio::from_vector(bounds.lower);
  manifest["bounds"]["upper"] = jsonio::from_vector(bounds.upper);
  json node_list = json::array();
  for (const auto& [id, nm] : nodes) node_list.push_back(id);
  manifest["nodes"] = node_list;
  jsonio::write_file(dir + "/manifest.json", manifest);

  for (const auto& [id, nm] : nodes) {
    fs::create_directories(dir + "/" + id + "/X");
    fs::create_directories(dir + "/" + id + "/Y");
    jsonio::write_file(dir + "/" + id + "/pca_X.basis",
                       basis_to_json(nm.basis_x, train_count));
    jsonio::write_file(dir + "/" + id + "/pca_Y.basis",
                       basis_to_json(nm.basis_y, train_count));
    for (int k = 0; k < p; ++k) {
      jsonio::write_file(channel_file(dir, id, "X", "dispPCA", k),
                         gp_to_json(nm.disp_x[k], config_hash));
      jsonio::write_file(channel_file(dir, id, "Y", "dispPCA", k),
                         gp_to_json(nm.disp_y[k], config_hash));
    }
    jsonio::write_file(channel_file(dir, id, "X", "load", -1),
                       gp_to_json(nm.load_x, config_hash));
    jsonio::write_file(channel_file(dir, id, "Y", "load", -1),
                       gp_to_json(nm.load_y, config_hash));
  }
}

SurrogateBank SurrogateBank::load(const std::string& dir) {
  const json manifest = jsonio::read_file(dir + "/manifest.json");
  SurrogateBank bank;
  bank.config_hash = manifest.at("config_hash").get<std::string>();
  bank.seed = manifest.at("seed").get<std::uint64_t>();
  bank.train_count = manifest.at("train_count").get<int>();
  bank.p = manifest.at("p").get<int>();
  bank.tree_depth = manifest.at("tree_depth").get<int>();
  bank.first_step = manifest.at("first_step").get<std::string>()[0];
  bank.bounds.lower = jsonio::to_vector(manifest.at("bounds").at("lower"));
  bank.bounds.upper = jsonio::to_vector(manifest.at("bounds").at("upper"));
  for (const auto& idj : manifest.at("nodes")) {
    const std::string id = idj.get<std::string>();
    NodeModels nm;
    nm.basis_x = basis_from_json(jsonio::read_file(dir + "/" + id + "/pca_X.basis"));
    nm.basis_y = basis_from_json(jsonio::read_file(dir + "/" + id + "/pca_Y.basis"));
    for (int k = 0; k < bank.p; ++k) {
      nm.disp_x.push_back(gp_from_json(jsonio::read_file(channel_file(dir, id, "X", "dispPCA", k))));
      nm.disp_y.push_back(gp_from_json(jsonio::read_file(channel_file(dir, id, "Y", "dispPCA", k))));
    }
    nm.load_x = gp_from_json(jsonio::read_file(channel_file(dir, id, "X", "load", -1)));
    nm.load_y = gp_from_json(jsonio::read_file(channel_file(dir, id, "Y", "load", -1)));
    bank.nodes.emplace(id, std::move(nm));
  }
  return bank;
}

// ------------------------------------------------------------- bank build --

BankBuildResult build_bank(const structure::CruciformMesh& mesh,
                           const material::MaterialParams& fixed_elastic,
                           const BankBuildSettings& s) {
  s.bounds.validate();
  if (s.sample_count < s.p + 2) throw std::invalid_argument("bank: too few samples");

  const auto node_ids = pathtree::subtree_nodes(s.tree_depth, s.first_step);
  std::map<std::string, int> node_index;
  for (std::size_t i = 0; i < node_ids.size(); ++i)
    node_index[node_ids[i]] = static_cast<int>(i);

  // Channel reuse from a previous, hash-matching build.
  bool resume_ok = false;
  if (!s.resume_dir.empty() && fs::exists(s.resume_dir + "/manifest.json")) {
    const json m = jsonio::read_file(s.resume_dir + "/manifest.json");
    resume_ok = m.at("config_hash").get<std::string>() == s.config_hash;
  }
  auto try_load_gp = [&](const std::string& node, const std::string& comp,
                         const std::string& qoi, int channel) -> std::optional<GpModel> {
    if (!resume_ok) return std::nullopt;
    const std::string f = channel_file(s.resume_dir, node, comp, qoi, channel);
    if (!fs::exists(f)) return std::nullopt;
    const json j = jsonio::read_file(f);
    if (j.value("config_hash", std::string()) != s.config_hash) return std::nullopt;
    return gp_from_json(j);
  };

  BankBuildResult result;
  result.theta_train = halton_samples(s.sample_count, s.bounds, 0);
  result.theta_held_out =
      s.held_out_count > 0 ? halton_samples(s.held_out_count, s.bounds, s.sample_count)
                           : Matrix(0, s.bounds.dim());

  const int total = s.sample_count + s.held_out_count;
  std::vector<std::vector<structure::FieldObservation>> obs(
      node_ids.size(), std::vector<structure::FieldObservation>(total));

  parallel_for(
      total,
      [&](std::size_t si) {
        const int i = static_cast<int>(si);
        material::MaterialParams mp = fixed_elastic;
        const Vector th = i < s.sample_count
                              ? result.theta_train.row(i).transpose()
                              : result.theta_held_out.row(i - s.sample_count).transpose();
        mp.sigma_y = th[0];
        mp.A = th[1];
        mp.n = th[2];
        mp.a = th[3];
        structure::PathSolver solver(mesh, mp, s.solver);
        std::function<void(const std::string&)> descend = [&](const std::string& cur) {
          if (static_cast<int>(cur.size()) == s.tree_depth) return;
          const auto ck = solver.checkpoint();
          for (char ax : {'A', 'B'}) {
            if (cur.empty() && ax != s.first_step) continue;
            if (ax == 'B') solver.restore(ck);
            const std::string child = cur + ax;
            obs[node_index[child]][si] = solver.apply_step(ax);
            descend(child);
          }
        };
        descend("");
      },
      s.threads > 0 ? s.threads : default_threads());

  SurrogateBank& bank = result.bank;
  bank.bounds = s.bounds;
  bank.p = s.p;
  bank.train_count = s.sample_count;
  bank.tree_depth = s.tree_depth;
  bank.first_step = s.first_step;
  bank.seed = s.seed;
  bank.config_hash = s.config_hash;

  const int v = static_cast<int>(mesh.gauge_nodes.size());
  Matrix z_train(s.sample_count, s.bounds.dim());
  for (int i = 0; i < s.sample_count; ++i)
    z_train.row(i) = s.bounds.normalize(result.theta_train.row(i).transpose()).transpose();

  // Variance-threshold mode: the bank keeps one p (the channel layout is
  // uniform across nodes), so take the largest per-(node, component) minimum.
  int p_used = s.p;
  if (s.variance_threshold) {
    p_used = 1;
    for (const auto& id : node_ids) {
      for (int comp = 0; comp < 2; ++comp) {
        Matrix a(s.sample_count, v);
        for (int i = 0; i < s.sample_count; ++i)
          a.row(i) = (comp == 0 ? obs[node_index[id]][i].disp_x
                                : obs[node_index[id]][i].disp_y)
                         .transpose();
        const reduce::PcaBasis probe =
            reduce::fit_pca(a, std::min<int>(s.sample_count, v));
        double cum = 0;
        int pk = static_cast<int>(probe.explained_variance_ratio.size());
        for (Eigen::Index k = 0; k < probe.explained_variance_ratio.size(); ++k) {
          cum += probe.explained_variance_ratio[k];
          if (cum >= *s.variance_threshold) {
            pk = static_cast<int>(k) + 1;
            break;
          }
        }
        p_used = std::max(p_used, pk);
      }
    }
  }
  bank.p = p_used;

  struct Task {
    std::string node, comp, qoi;
    int channel;
    Vector targets;
    GpModel* slot;
  };
  std::vector<Task> tasks;

  for (const auto& id : node_ids) {
    Matrix ax(s.sample_count, v), ay(s.sample_count, v);
    Vector lx(s.sample_count), ly(s.sample_count);
    for (int i = 0; i < s.sample_count; ++i) {
      ax.row(i) = obs[node_index[id]][i].disp_x.transpose();
      ay.row(i) = obs[node_index[id]][i].disp_y.transpose();
      lx[i] = obs[node_index[id]][i].load_x;
      ly[i] = obs[node_index[id]][i].load_y;
    }
    NodeModels nm;
    nm.basis_x = reduce::fit_pca(ax, p_used);
    nm.basis_x.node_id = id;
    nm.basis_x.component = "X";
    nm.basis_y = reduce::fit_pca(ay, p_used);
    nm.basis_y.node_id = id;
    nm.basis_y.component = "Y";
    nm.disp_x.resize(p_used);
    nm.disp_y.resize(p_used);
    NodeModels& slot = bank.nodes.emplace(id, std::move(nm)).first->second;

    const Matrix sx = (ax.rowwise() - slot.basis_x.mean.transpose()) *
                      slot.basis_x.components.transpose();
    const Matrix sy = (ay.rowwise() - slot.basis_y.mean.transpose()) *
                      slot.basis_y.components.transpose();
    for (int k = 0; k < p_used; ++k) {
      tasks.push_back({id, "X", "dispPCA", k, sx.col(k), &slot.disp_x[k]});
      tasks.push_back({id, "Y", "dispPCA", k, sy.col(k), &slot.disp_y[k]});
    }
    tasks.push_back({id, "X", "load", -1, lx, &slot.load_x});
    tasks.push_back({id, "Y", "load", -1, ly, &slot.load_y});

    result.training[id].assign(obs[node_index[id]].begin(),
                               obs[node_index[id]].begin() + s.sample_count);
    result.held_out_obs[id].assign(obs[node_index[id]].begin() + s.sample_count,
                                   obs[node_index[id]].end());
  }

  parallel_for(
      tasks.size(),
      [&](std::size_t ti) {
        Task& t = tasks[ti];
        if (auto loaded = try_load_gp(t.node, t.comp, t.qoi, t.channel)) {
          *t.slot = std::move(*loaded);
          return;
        }
        GpSettings gs = s.gp;
        gs.seed = derive_seed(s.seed, "gp-train", hash_str(t.node + t.comp + t.qoi),
                              static_cast<std::uint64_t>(t.channel + 1));
        try {
          *t.slot = GpModel::train(z_train, t.targets, gs);
        } catch (const std::exception& e) {
          throw TrainingError("gp training failed for node " + t.node + " " + t.qoi +
                              "_" + t.comp + " channel " + std::to_string(t.channel) +
                              ": " + e.what());
        }
      },
      s.threads > 0 ? s.threads : default_threads());

  // Held-out error budget per channel.
  if (s.held_out_count > 0) {
    Matrix zq(s.held_out_count, s.bounds.dim());
    for (int i = 0; i < s.held_out_count; ++i)
      zq.row(i) =
          s.bounds.normalize(result.theta_held_out.row(i).transpose()).transpose();
    for (const Task& t : tasks) {
      const NodeModels& nm = bank.node(t.node);
      const auto& ho = result.held_out_obs.at(t.node);
      Vector truth(s.held_out_count);
      for (int i = 0; i < s.held_out_count; ++i) {
        if (t.qoi == "load") {
          truth[i] = t.comp == "X" ? ho[i].load_x : ho[i].load_y;
        } else {
          const reduce::PcaBasis& b = t.comp == "X" ? nm.basis_x : nm.basis_y;
          const Vector field = t.comp == "X" ? ho[i].disp_x : ho[i].disp_y;
          truth[i] = reduce::project(b, field)[t.channel];
        }
      }
      const GpModel& gp = *t.slot;
      HeldOutError e;
      e.node_id = t.node;
      e.qoi = t.qoi;
      e.component = t.comp;
      e.channel = t.channel;
      e.mae = (gp.predict_mean(zq) - truth).cwiseAbs().mean();
      e.target_range = t.targets.maxCoeff() - t.targets.minCoeff();
      e.noise_std = t.qoi == "load" ? std::sqrt(s.psi2_load) : std::sqrt(s.psi2_disp);
      double acc = 0;
      for (int i = 0; i < s.held_out_count; ++i)
        acc += std::sqrt(gp.predict_variance(zq.row(i).transpose()));
      e.mean_pred_std = acc / s.held_out_count;
      result.held_out.push_back(e);
    }
  }
  return result;
}

}  // namespace icc::surrogate
