#pragma once

#include <string>

#include "icc/common.hpp"

namespace icc::reduce {

/// PCA basis for one (tree node, displacement component) pair.
/// `components` holds the retained right singular vectors as rows (p x v).
struct PcaBasis {
  Vector mean;                      // length v
  Matrix components;                // p x v, orthonormal rows
  Vector singular_values;           // length r, non-increasing
  Vector explained_variance_ratio;  // length r, sums to 1
  int p = 0;
  bool degenerate_rank = false;
  std::string node_id;
  std::string component;  // "X" or "Y"

  int field_size() const { return static_cast<int>(mean.size()); }
};

/// Reduced data at one tree node: PCA scores for both displacement
/// components plus the two resultant loads.
struct ReducedObservation {
  Vector scores_x;
  Vector scores_y;
  double load_x = 0.0;
  double load_y = 0.0;
  std::string node_id;

  Vector flatten() const {
    Vector d(scores_x.size() + scores_y.size() + 2);
    d << scores_x, scores_y, load_x, load_y;
    return d;
  }
};

/// Center the training matrix, take its SVD and retain the top p right
/// singular vectors. Component signs follow a fixed convention: the entry
/// of largest magnitude in each retained component is positive.
PcaBasis fit_pca(const Matrix& training, int p);

/// scores = (field - mean) V*
Vector project(const PcaBasis& basis, const Vector& field);

/// field = mean + scores V*^T
Vector reconstruct(const PcaBasis& basis, const Vector& scores);

/// Exact propagation of iid field noise into score space:
/// V*^T (psi2 I_v) V*. Computed explicitly, not assumed diagonal.
Matrix transform_noise_covariance(const PcaBasis& basis, double psi2_disp);

}  // namespace icc::reduce
