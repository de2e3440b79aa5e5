#include "icc/reduce.hpp"

#include <Eigen/SVD>
#include <stdexcept>

namespace icc::reduce {

PcaBasis fit_pca(const Matrix& training, int p) {
  const Eigen::Index u = training.rows(), v = training.cols();
  if (p < 1 || u < p || v < p) throw std::invalid_argument("fit_pca: need u >= p >= 1 and v >= p");
  if (!training.allFinite()) throw std::invalid_argument("fit_pca: non-finite entries");

  PcaBasis b;
  b.p = p;
  b.mean = training.colwise().mean();
  Matrix centered = training.rowwise() - b.mean.transpose();

  Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const Eigen::Index r = s.size();

  b.singular_values = s;
  const double total = s.squaredNorm();
  b.explained_variance_ratio =
      total > 0 ? Vector(s.array().square() / total) : Vector(Vector::Zero(r));

  b.components = Matrix::Zero(p, v);
  const double rank_floor = s.size() > 0 ? s[0] * 1e-12 : 0.0;
  for (int k = 0; k < p; ++k) {
    if (s[k] <= rank_floor) {
      b.degenerate_rank = true;
      b.singular_values[k] = 0.0;
      continue;  // trailing zero component
    }
    Vector row = svd.matrixV().col(k);
    Eigen::Index imax;
    row.cwiseAbs().maxCoeff(&imax);
    if (row[imax] < 0) row = -row;
    b.components.row(k) = row.transpose();
  }
  return b;
}

Vector project(const PcaBasis& basis, const Vector& field) {
  if (field.size() != basis.mean.size())
    throw std::invalid_argument("project: field length mismatch");
  return basis.components * (field - basis.mean);
}

Vector reconstruct(const PcaBasis& basis, const Vector& scores) {
  if (scores.size() != basis.p) throw std::invalid_argument("reconstruct: score length mismatch");
  return basis.mean + basis.components.transpose() * scores;
}

Matrix transform_noise_covariance(const PcaBasis& basis, double psi2_disp) {
  if (!(psi2_disp > 0)) throw std::invalid_argument("psi2_disp must be positive");
  return psi2_disp * (basis.components * basis.components.transpose());
}

}  // namespace icc::reduce
