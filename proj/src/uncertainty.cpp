#include "smpc/uncertainty.hpp"

#include <cmath>
#include <limits>

#include "smpc/errors.hpp"

namespace smpc {

Ellipsoid::Ellipsoid(Matrix shape, double level)
    : shape_(std::move(shape)), level_(level), factor_(shape_) {
  if (shape_.rows() != shape_.cols() || shape_.rows() == 0)
    throw InputError("Ellipsoid: shape must be square and nonempty");
  if (!(level_ > 0.0) || !std::isfinite(level_)) throw InputError("Ellipsoid: level must be positive");
  const double scale = std::max(1.0, shape_.cwiseAbs().maxCoeff());
  if ((shape_ - shape_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw InputError("Ellipsoid: shape is not symmetric");
  if (factor_.info() != Eigen::Success || factor_.matrixL().toDenseMatrix().diagonal().minCoeff() <= 0.0)
    throw InputError("Ellipsoid: shape matrix is singular or not positive definite");
}

double Ellipsoid::support(const Vector& a) const {
  return std::sqrt(level_ * a.dot(shape_ * a));
}

Vector Ellipsoid::support_point(const Vector& a) const {
  const double q = a.dot(shape_ * a);
  if (q <= 0.0) return Vector::Zero(dim());
  return shape_ * a * std::sqrt(level_ / q);
}

bool Ellipsoid::contains(const Vector& x) const {
  const Vector y = factor_.matrixL().solve(x);
  return y.squaredNorm() <= level_;
}

double chebyshev_level(int n, double p) {
  if (n < 1) throw InputError("chebyshev_level: dimension must be >= 1");
  if (!(p > 0.0 && p < 1.0)) throw InputError("chebyshev_level: p must lie in (0, 1)");
  return n / (1.0 - p);
}

namespace {

constexpr double kEps = 1e-16;
constexpr int kMaxTerms = 10'000;

// Σ x^k / (a (a+1) ... (a+k)), scaled by e^{-x} x^a / Γ(a).
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int k = 1; k < kMaxTerms; ++k) {
    term *= x / (a + k);
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a, x), modified Lentz.
double gamma_q_fraction(double a, double x) {
  constexpr double tiny = std::numeric_limits<double>::min() / kEps;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxTerms; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0)) throw InputError("regularized_gamma_p: a must be positive");
  if (x <= 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_fraction(a, x);
}

double chi2_quantile(int n, double p) {
  if (n < 1) throw InputError("chi2_quantile: degrees of freedom must be >= 1");
  if (!(p > 0.0 && p < 1.0)) throw InputError("chi2_quantile: p must lie in (0, 1)");
  const double a = 0.5 * n;
  auto cdf = [a](double t) { return regularized_gamma_p(a, 0.5 * t); };

  double lo = 0.0;
  double hi = n + 40.0 * std::sqrt(static_cast<double>(n));
  while (cdf(hi) < p) {  // only for p extremely close to 1
    lo = hi;
    hi *= 2.0;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (cdf(mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

Ellipsoid state_prs(const Matrix& sigma_inf, double p, bool gaussian) {
  const int n = static_cast<int>(sigma_inf.rows());
  const double level = gaussian ? chi2_quantile(n, p) : chebyshev_level(n, p);
  Eigen::LLT<Matrix> llt(sigma_inf);
  if (llt.info() != Eigen::Success)
    throw InputError("state PRS: steady-state covariance is singular; reduce the problem to the "
                     "subspace excited by the disturbance");
  return Ellipsoid(sigma_inf, level);
}

Ellipsoid input_prs(const Matrix& K, const Matrix& sigma_inf, double p, bool gaussian) {
  Matrix S = K * sigma_inf * K.transpose();
  S = 0.5 * (S + S.transpose());
  const int n = static_cast<int>(S.rows());
  Eigen::LLT<Matrix> llt(S);
  if (llt.info() != Eigen::Success || S.diagonal().minCoeff() <= 0.0)
    throw InputError("input PRS: input-error covariance K S K' is singular");
  const double level = gaussian ? chi2_quantile(n, p) : chebyshev_level(n, p);
  return Ellipsoid(std::move(S), level);
}

double empirical_coverage(const Ellipsoid& e, const Matrix& samples) {
  if (samples.cols() == 0) throw InputError("empirical_coverage: empty sample set");
  if (samples.rows() != e.dim()) throw InputError("empirical_coverage: dimension mismatch");
  Eigen::Index inside = 0;
  for (Eigen::Index j = 0; j < samples.cols(); ++j) inside += e.contains(samples.col(j)) ? 1 : 0;
  return static_cast<double>(inside) / static_cast<double>(samples.cols());
}

}  // namespace smpc
