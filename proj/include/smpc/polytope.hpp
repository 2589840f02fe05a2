#pragma once

#include <Eigen/Dense>

namespace smpc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Halfspace polytope {x : H x <= h}.
struct Polytope {
  Matrix H;
  Vector h;

  Eigen::Index dim() const { return H.cols(); }
  Eigen::Index rows() const { return H.rows(); }

  /// Membership with slack `tol` on every row. Throws InputError on a
  /// dimension mismatch.
  bool contains(const Vector& x, double tol = 1e-9) const;
};

/// Each row scaled to unit Euclidean norm.
Polytope normalize_euclidean(const Polytope& p);

/// Each row divided by the magnitude of its first nonzero coefficient.
Polytope normalize_leading(const Polytope& p);

/// Each row divided by the magnitude of its largest coefficient.
Polytope normalize_dominant(const Polytope& p);

}  // namespace smpc
