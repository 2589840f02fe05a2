#pragma once

#include <Eigen/Cholesky>

#include "smpc/polytope.hpp"

namespace smpc {

/// {x : x' shape^{-1} x <= level}.
class Ellipsoid {
 public:
  /// Throws InputError unless `shape` is symmetric positive definite and
  /// `level` is positive.
  Ellipsoid(Matrix shape, double level);

  const Matrix& shape() const { return shape_; }
  double level() const { return level_; }
  Eigen::Index dim() const { return shape_.rows(); }

  /// max over the set of a'x.
  double support(const Vector& a) const;
  /// Point of the set where `support(a)` is attained.
  Vector support_point(const Vector& a) const;
  bool contains(const Vector& x) const;

 private:
  Matrix shape_;
  double level_;
  Eigen::LLT<Matrix> factor_;
};

/// Chebyshev level n / (1 - p), valid for any distribution with the given
/// second moment.
double chebyshev_level(int n, double p);

/// Regularized lower incomplete gamma function P(a, x).
double regularized_gamma_p(double a, double x);

/// Inverse CDF of the chi-squared distribution with n degrees of freedom.
double chi2_quantile(int n, double p);

/// Ellipsoid(sigma, level) where the level is the chi-squared quantile when
/// `gaussian` and the Chebyshev level otherwise.
Ellipsoid state_prs(const Matrix& sigma_inf, double p, bool gaussian);

/// The PRS of the input error K e, built from its own covariance K S K'.
Ellipsoid input_prs(const Matrix& K, const Matrix& sigma_inf, double p, bool gaussian);

/// Fraction of the columns of `samples` that lie in `e`.
double empirical_coverage(const Ellipsoid& e, const Matrix& samples);

}  // namespace smpc
