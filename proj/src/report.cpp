#include "icc/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "icc/stats.hpp"

namespace icc::report {

PredictiveEnsemble posterior_predictive(const infer::GaussianPosterior& posterior,
                                        const std::string& path,
                                        const surrogate::SurrogateBank& bank,
                                        const infer::NoiseModel& noise, int count,
                                        std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("posterior_predictive: count");
  PredictiveEnsemble e;
  e.path_id = path;
  for (std::size_t t = 1; t <= path.size(); ++t) e.nodes.push_back(path.substr(0, t));
  for (const auto& n : e.nodes)
    if (!bank.has_node(n)) throw std::invalid_argument("bank has no node " + n);

  std::mt19937_64 rng(derive_seed(seed, "posterior-predictive", hash_str(path)));
  e.draws.resize(count, posterior.dim());
  for (int i = 0; i < count; ++i) e.draws.row(i) = posterior.draw(rng).transpose();

  const int p = bank.p;
  for (const auto& n : e.nodes) {
    Matrix red = bank.predict_batch(n, e.draws);
    for (int i = 0; i < count; ++i)
      red.row(i) = noise.sample_observation(n, red.row(i).transpose(), rng).transpose();
    const auto& nm = bank.node(n);
    Matrix fx(count, nm.basis_x.field_size()), fy(count, nm.basis_y.field_size());
    for (int i = 0; i < count; ++i) {
      fx.row(i) = reduce::reconstruct(nm.basis_x, red.row(i).segment(0, p).transpose())
                      .transpose();
      fy.row(i) = reduce::reconstruct(nm.basis_y, red.row(i).segment(p, p).transpose())
                      .transpose();
    }
    e.reduced.push_back(std::move(red));
    e.fields_x.push_back(std::move(fx));
    e.fields_y.push_back(std::move(fy));
  }
  return e;
}

namespace {
std::pair<double, double> band_of(std::vector<double> v) {
  return {stats::percentile(v, 0.025), stats::percentile(v, 0.975)};
}

void field_band(const Matrix& fields, Vector& lower, Vector& upper) {
  const Eigen::Index v = fields.cols();
  lower.resize(v);
  upper.resize(v);
  std::vector<double> col(fields.rows());
  for (Eigen::Index j = 0; j < v; ++j) {
    for (Eigen::Index i = 0; i < fields.rows(); ++i) col[i] = fields(i, j);
    lower[j] = stats::percentile(col, 0.025);
    upper[j] = stats::percentile(col, 0.975);
  }
}
}  // namespace

CredibleBands credible_band(const PredictiveEnsemble& e,
                            const std::vector<structure::FieldObservation>* observed) {
  if (e.draws.rows() < 20) throw std::invalid_argument("credible_band: need >= 20 draws");
  CredibleBands b;
  const int p = (static_cast<int>(e.reduced.front().cols()) - 2) / 2;
  for (std::size_t t = 0; t < e.nodes.size(); ++t) {
    std::vector<double> lx(e.draws.rows()), ly(e.draws.rows());
    for (Eigen::Index i = 0; i < e.draws.rows(); ++i) {
      lx[i] = e.reduced[t](i, 2 * p);
      ly[i] = e.reduced[t](i, 2 * p + 1);
    }
    const auto [lxl, lxu] = band_of(lx);
    const auto [lyl, lyu] = band_of(ly);
    b.load_x_lower.push_back(lxl);
    b.load_x_upper.push_back(lxu);
    b.load_y_lower.push_back(lyl);
    b.load_y_upper.push_back(lyu);
    Vector fl, fu;
    field_band(e.fields_x[t], fl, fu);
    b.field_x_lower.push_back(fl);
    b.field_x_upper.push_back(fu);
    field_band(e.fields_y[t], fl, fu);
    b.field_y_lower.push_back(fl);
    b.field_y_upper.push_back(fu);
  }

  if (observed) {
    if (observed->size() != e.nodes.size())
      throw std::invalid_argument("credible_band: observation count mismatch");
    for (std::size_t t = 0; t < e.nodes.size(); ++t) {
      const auto& o = (*observed)[t];
      b.loads_covered = b.loads_covered && o.load_x >= b.load_x_lower[t] &&
                        o.load_x <= b.load_x_upper[t] && o.load_y >= b.load_y_lower[t] &&
                        o.load_y <= b.load_y_upper[t];
      b.diff_lower_x.push_back(o.disp_x - b.field_x_lower[t]);
      b.diff_upper_x.push_back(o.disp_x - b.field_x_upper[t]);
      b.diff_lower_y.push_back(o.disp_y - b.field_y_lower[t]);
      b.diff_upper_y.push_back(o.disp_y - b.field_y_upper[t]);
      long outside = 0;
      const long n = 2 * o.disp_x.size();
      outside += (o.disp_x.array() < b.field_x_lower[t].array()).count();
      outside += (o.disp_x.array() > b.field_x_upper[t].array()).count();
      outside += (o.disp_y.array() < b.field_y_lower[t].array()).count();
      outside += (o.disp_y.array() > b.field_y_upper[t].array()).count();
      b.outside_fraction.push_back(static_cast<double>(outside) / static_cast<double>(n));
    }
  }
  return b;
}

double bflpd(const std::vector<reduce::ReducedObservation>& data, const Vector& theta_map,
             const surrogate::SurrogateBank& bank, const infer::NoiseModel& noise) {
  return infer::log_likelihood(data, theta_map, bank, noise);
}

infer::NoiseModel::QoiTerms qoi_loglike_contributions(
    const std::vector<reduce::ReducedObservation>& data, const Vector& theta,
    const surrogate::SurrogateBank& bank, const infer::NoiseModel& noise) {
  infer::NoiseModel::QoiTerms sum;
  for (const auto& obs : data) {
    const auto pred = bank.predict(obs.node_id, theta);
    const auto t = noise.logpdf_terms(obs.node_id, obs.flatten(), pred.flatten());
    sum.disp_x += t.disp_x;
    sum.disp_y += t.disp_y;
    sum.load_x += t.load_x;
    sum.load_y += t.load_y;
  }
  return sum;
}

namespace {
ChannelErrors accumulate_errors(const std::vector<double>& truth,
                                const std::vector<double>& pred) {
  ChannelErrors e;
  double smape_sum = 0;
  long smape_n = 0;
  double mae_sum = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double t = truth[i], q = pred[i];
    mae_sum += std::abs(q - t);
    const double denom = std::abs(q) + std::abs(t);
    if (denom > 0) {
      smape_sum += 2.0 * std::abs(q - t) / denom;
      ++smape_n;
    }
  }
  e.mae = truth.empty() ? 0.0 : mae_sum / static_cast<double>(truth.size());
  e.smape = smape_n ? 100.0 * smape_sum / static_cast<double>(smape_n) : 0.0;
  return e;
}
}  // namespace

ErrorMetrics error_metrics(const std::vector<structure::FieldObservation>& truth,
                           const std::vector<structure::FieldObservation>& prediction) {
  if (truth.size() != prediction.size())
    throw std::invalid_argument("error_metrics: step count mismatch");
  std::vector<double> tx, ty, px, py, tlx, tly, plx, ply;
  for (std::size_t s = 0; s < truth.size(); ++s) {
    if (truth[s].disp_x.size() != prediction[s].disp_x.size())
      throw std::invalid_argument("error_metrics: field size mismatch");
    for (Eigen::Index i = 0; i < truth[s].disp_x.size(); ++i) {
      tx.push_back(truth[s].disp_x[i]);
      px.push_back(prediction[s].disp_x[i]);
      ty.push_back(truth[s].disp_y[i]);
      py.push_back(prediction[s].disp_y[i]);
    }
    tlx.push_back(truth[s].load_x);
    plx.push_back(prediction[s].load_x);
    tly.push_back(truth[s].load_y);
    ply.push_back(prediction[s].load_y);
  }
  ErrorMetrics m;
  m.disp_x = accumulate_errors(tx, px);
  m.disp_y = accumulate_errors(ty, py);
  m.load_x = accumulate_errors(tlx, plx);
  m.load_y = accumulate_errors(tly, ply);
  return m;
}

std::vector<LineScan> default_line_scans(const structure::CruciformMesh& mesh) {
  LineScan horizontal{"line1_horizontal", {}, {}};
  LineScan diagonal{"line2_diagonal", {}, {}};
  std::vector<std::pair<double, int>> h, d;
  for (std::size_t i = 0; i < mesh.gauge_nodes.size(); ++i) {
    const auto& pt = mesh.nodes[mesh.gauge_nodes[i]];
    if (std::abs(pt.y()) < 1e-9) h.emplace_back(pt.x(), static_cast<int>(i));
    if (std::abs(pt.y() - pt.x()) < 1e-9) d.emplace_back(pt.norm(), static_cast<int>(i));
  }
  std::sort(h.begin(), h.end());
  std::sort(d.begin(), d.end());
  auto fill = [](LineScan& scan, const std::vector<std::pair<double, int>>& pts) {
    const double len = pts.back().first;
    scan.position.resize(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      scan.gauge_indices.push_back(pts[i].second);
      scan.position[static_cast<Eigen::Index>(i)] = len > 0 ? pts[i].first / len : 0.0;
    }
  };
  fill(horizontal, h);
  fill(diagonal, d);
  return {horizontal, diagonal};
}

// ----------------------------------------------------------------- emit --

namespace {
std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::ofstream open_out(const std::string& file) {
  std::ofstream f(file);
  if (!f) throw std::runtime_error("cannot write " + file);
  return f;
}
}  // namespace

std::vector<std::string> emit_reports(const RunArtifacts& a, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> written;

  if (!a.calibrations.empty()) {
    const std::string file = dir + "/posterior_summaries.csv";
    auto f = open_out(file);
    f << "path,E_sigma_y,E_A,E_n,E_a,V_sigma_y,V_A,V_n,V_a,zeta_sigma_y,zeta_A,zeta_n,"
         "zeta_a,det_sigma\n";
    for (const auto& [path, s] : a.calibrations) {
      f << path;
      for (int d = 0; d < 4; ++d) f << ',' << fmt(s.mean[d]);
      for (int d = 0; d < 4; ++d) f << ',' << fmt(s.variance[d]);
      for (int d = 0; d < 4; ++d) f << ',' << fmt(s.ci_half_width[d]);
      f << ',' << fmt(s.generalized_variance) << '\n';
    }
    written.push_back(file);

    for (const auto& [path, s] : a.calibrations) {
      const std::string cfile = dir + "/correlation_" + path + ".csv";
      auto cf = open_out(cfile);
      cf << "param,sigma_y,A,n,a\n";
      const char* names[4] = {"sigma_y", "A", "n", "a"};
      for (int i = 0; i < 4; ++i) {
        cf << names[i];
        for (int j = 0; j < 4; ++j) cf << ',' << fmt(s.correlation(i, j));
        cf << '\n';
      }
      written.push_back(cfile);
    }
  }

  if (a.icc) {
    const std::string file = dir + "/eig_steps.csv";
    auto f = open_out(file);
    f << "decision_after_step,node,eig_A,se_A,eig_B,se_B,chosen,tie,fallback_A,"
         "fallback_B,wall_seconds\n";
    for (std::size_t t = 0; t < a.icc->steps.size(); ++t) {
      const auto& st = a.icc->steps[t];
      if (!st.selection) continue;
      const auto& sel = *st.selection;
      f << (t + 1) << ',' << st.node << ',' << fmt(sel.eig_a.value) << ','
        << fmt(sel.eig_a.std_error) << ',' << fmt(sel.eig_b.value) << ','
        << fmt(sel.eig_b.std_error) << ',' << sel.axis << ',' << (sel.tie ? 1 : 0) << ','
        << sel.eig_a.fallback_count << ',' << sel.eig_b.fallback_count << ','
        << fmt(st.wall_seconds) << '\n';
    }
    written.push_back(file);
  }

  if (a.bflpd_matrix.size() > 0) {
    const std::string file = dir + "/bflpd.csv";
    auto f = open_out(file);
    f << "prediction_path";
    for (const auto& c : a.bflpd_cols) f << ",cal_" << c;
    f << '\n';
    for (Eigen::Index i = 0; i < a.bflpd_matrix.rows(); ++i) {
      f << a.bflpd_rows[static_cast<std::size_t>(i)];
      for (Eigen::Index j = 0; j < a.bflpd_matrix.cols(); ++j)
        f << ',' << fmt(a.bflpd_matrix(i, j));
      f << '\n';
    }
    written.push_back(file);
  }

  if (!a.line_scans.empty()) {
    const std::string file = dir + "/line_scans.csv";
    auto f = open_out(file);
    f << "scan,component,step,position,observed,map_prediction,lower95,upper95\n";
    for (const auto& ls : a.line_scans) {
      for (Eigen::Index i = 0; i < ls.position.size(); ++i) {
        f << ls.scan << ',' << ls.component << ',' << ls.step << ','
          << fmt(ls.position[i]) << ',' << fmt(ls.observed[i]) << ','
          << fmt(ls.map_prediction[i]) << ',' << fmt(ls.lower[i]) << ','
          << fmt(ls.upper[i]) << '\n';
      }
    }
    written.push_back(file);
  }
  return written;
}

}  // namespace icc::report
