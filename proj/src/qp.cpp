#include "smpc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/LU>

#include "smpc/errors.hpp"

namespace smpc::qp {

const char* to_string(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::max_iterations: return "max_iterations";
  }
  return "?";
}

namespace {

/// min 0.5 x'Hx + c'x  s.t.  A x = b,  G x <= h.
struct StandardForm {
  Matrix H;
  Vector c;
  Matrix G;
  Vector h;
  Matrix A;
  Vector b;
};

double inf_norm(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }
double inf_norm(const Matrix& M) { return M.size() ? M.cwiseAbs().maxCoeff() : 0.0; }

StandardForm to_standard(const QpProblem& p) {
  const Eigen::Index n = p.gradient.size();
  if (n == 0) throw InputError("qp: empty decision vector");
  if (p.hessian.rows() != n || p.hessian.cols() != n) throw InputError("qp: hessian dimension mismatch");
  if (p.G.size() || p.g.size()) {
    if (p.G.cols() != n || p.G.rows() != p.g.size()) throw InputError("qp: inequality dimension mismatch");
  }
  if (p.A_eq.size() || p.b_eq.size()) {
    if (p.A_eq.cols() != n || p.A_eq.rows() != p.b_eq.size()) throw InputError("qp: equality dimension mismatch");
  }
  if (p.lower.size() && p.lower.size() != n) throw InputError("qp: lower bound dimension mismatch");
  if (p.upper.size() && p.upper.size() != n) throw InputError("qp: upper bound dimension mismatch");
  const double hscale = std::max(1.0, inf_norm(p.hessian));
  if (inf_norm(Matrix(p.hessian - p.hessian.transpose())) > 1e-12 * hscale)
    throw InputError("qp: hessian is not symmetric");

  StandardForm f;
  f.H = p.hessian;
  f.c = p.gradient;
  f.A = p.A_eq.size() ? p.A_eq : Matrix(0, n);
  f.b = p.b_eq.size() ? p.b_eq : Vector(0);

  Eigen::Index nlo = 0, nhi = 0;
  for (Eigen::Index i = 0; i < p.lower.size(); ++i) nlo += std::isfinite(p.lower[i]) ? 1 : 0;
  for (Eigen::Index i = 0; i < p.upper.size(); ++i) nhi += std::isfinite(p.upper[i]) ? 1 : 0;
  const Eigen::Index mg = p.G.size() ? p.G.rows() : 0;
  f.G = Matrix::Zero(mg + nlo + nhi, n);
  f.h = Vector::Zero(mg + nlo + nhi);
  if (mg) {
    f.G.topRows(mg) = p.G;
    f.h.head(mg) = p.g;
  }
  Eigen::Index r = mg;
  for (Eigen::Index i = 0; i < p.lower.size(); ++i)
    if (std::isfinite(p.lower[i])) {
      f.G(r, i) = -1.0;
      f.h[r++] = -p.lower[i];
    }
  for (Eigen::Index i = 0; i < p.upper.size(); ++i)
    if (std::isfinite(p.upper[i])) {
      f.G(r, i) = 1.0;
      f.h[r++] = p.upper[i];
    }
  return f;
}

struct CoreResult {
  bool converged = false;
  Vector x, y, z;
  int iterations = 0;
};

/// Factorization of the augmented KKT matrix
///   [H  A'  G'] [dx]
///   [A  0   0 ] [dy]
///   [G  0  -D ] [dz]
/// with iterative refinement against the unregularized system. The augmented
/// form stays accurate when the barrier weights 1/D degenerate.
class KktSolver {
 public:
  KktSolver(const Matrix& H, const Matrix& G, const Vector& d, const Matrix& A) {
    const Eigen::Index n = H.rows(), p = A.rows(), m = G.rows();
    K_ = Matrix::Zero(n + p + m, n + p + m);
    K_.topLeftCorner(n, n) = H;
    if (p) {
      K_.block(0, n, n, p) = A.transpose();
      K_.block(n, 0, p, n) = A;
    }
    if (m) {
      K_.block(0, n + p, n, m) = G.transpose();
      K_.block(n + p, 0, m, n) = G;
      K_.bottomRightCorner(m, m).diagonal() = -d;
    }
    const double reg = 1e-13 * std::max({1.0, inf_norm(H), inf_norm(A), inf_norm(G)});
    Matrix Kreg = K_;
    Kreg.topLeftCorner(n, n).diagonal().array() += reg;
    // The inequality block already carries -D < 0.
    if (p) Kreg.block(n, n, p, p).diagonal().array() -= reg;
    lu_.compute(Kreg);
  }

  Vector solve(const Vector& rhs) const {
    Vector sol = lu_.solve(rhs);
    for (int k = 0; k < 2; ++k) sol += lu_.solve(rhs - K_ * sol);
    return sol;
  }

 private:
  Matrix K_;
  Eigen::PartialPivLU<Matrix> lu_;
};

double max_step(const Vector& v, const Vector& dv) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
  return alpha;
}

CoreResult interior_point(const StandardForm& f, const Settings& settings) {
  const Eigen::Index n = f.c.size(), m = f.h.size(), p = f.b.size();
  CoreResult res;
  res.y = Vector::Zero(p);
  res.z = Vector::Zero(m);

  const double dual_scale = 1.0 + std::max(inf_norm(f.c), inf_norm(f.H));
  const double primal_scale = 1.0 + std::max(inf_norm(f.h), inf_norm(f.b));
  const double tol = settings.tolerance;

  // Initial point: solve the KKT system with unit slack weights, then shift
  // s and z into the interior.
  Vector s, z;
  {
    KktSolver kkt(f.H, f.G, Vector::Ones(m), f.A);
    Vector rhs(n + p + m);
    rhs.head(n) = -f.c;
    rhs.segment(n, p) = f.b;
    rhs.tail(m) = f.h;
    const Vector sol = kkt.solve(rhs);
    res.x = sol.head(n);
    res.y = sol.segment(n, p);
    if (!res.x.allFinite() || !res.y.allFinite()) {
      res.x.setZero();
      res.y.setZero();
    }
    s = f.h - f.G * res.x;
    z = m ? Vector(sol.tail(m)) : Vector(0);
    if (m) {
      const double ds = std::max(0.0, -1.5 * s.minCoeff()) + 1.0;
      const double dz = std::max(0.0, -1.5 * z.minCoeff()) + 1.0;
      s.array() += ds;
      z.array() += dz;
      if (!z.allFinite()) z.setOnes();
    }
  }

  Vector& x = res.x;
  Vector& y = res.y;
  for (int it = 0; it < settings.max_iterations; ++it) {
    res.iterations = it;
    const Vector r_d = f.H * x + f.c + f.A.transpose() * y + f.G.transpose() * z;
    const Vector r_e = f.A * x - f.b;
    const Vector r_i = f.G * x + s - f.h;
    const double mu = m ? s.dot(z) / m : 0.0;

    if (inf_norm(r_d) <= tol * dual_scale && inf_norm(r_e) <= tol * primal_scale &&
        inf_norm(r_i) <= tol * primal_scale && mu <= tol) {
      res.converged = true;
      res.z = z;
      return res;
    }
    if (!x.allFinite() || !z.allFinite() || inf_norm(x) > 1e12 || inf_norm(z) > 1e12) break;

    KktSolver kkt(f.H, f.G, s.cwiseQuotient(z), f.A);

    // Newton step for the complementarity target s∘z = r_c.
    auto direction = [&](const Vector& r_c, Vector& dx, Vector& dy, Vector& dz, Vector& ds) {
      Vector rhs(n + p + m);
      rhs.head(n) = -r_d;
      rhs.segment(n, p) = -r_e;
      rhs.tail(m) = -r_i + r_c.cwiseQuotient(z);
      const Vector sol = kkt.solve(rhs);
      dx = sol.head(n);
      dy = sol.segment(n, p);
      dz = sol.tail(m);
      ds = -r_i - f.G * dx;
    };

    Vector dx, dy, dz, ds;
    // Predictor.
    direction(s.cwiseProduct(z), dx, dy, dz, ds);
    double alpha = std::min(max_step(s, ds), max_step(z, dz));
    if (m) {
      const double mu_aff = (s + alpha * ds).dot(z + alpha * dz) / m;
      const double sigma = std::pow(std::max(0.0, mu_aff) / mu, 3);
      // Corrector.
      const Vector r_c =
          (s.cwiseProduct(z) + ds.cwiseProduct(dz)).array() - sigma * mu;
      direction(r_c, dx, dy, dz, ds);
      alpha = std::min(1.0, 0.99 * std::min(max_step(s, ds), max_step(z, dz)));
    } else {
      alpha = 1.0;
    }
    x += alpha * dx;
    y += alpha * dy;
    z += alpha * dz;
    s += alpha * ds;
    if (m) {
      // Keep strictly interior.
      s = s.cwiseMax(1e-300);
      z = z.cwiseMax(1e-300);
    }
  }
  res.z = z;
  return res;
}

KktResiduals residuals(const StandardForm& f, const Vector& x, const Vector& y, const Vector& z) {
  KktResiduals k;
  const Vector slack = f.h - f.G * x;
  k.primal = std::max(inf_norm(Vector(f.A * x - f.b)),
                      slack.size() ? std::max(0.0, -slack.minCoeff()) : 0.0);
  k.dual = inf_norm(Vector(f.H * x + f.c + f.A.transpose() * y + f.G.transpose() * z));
  k.complementarity = slack.size() ? inf_norm(Vector(z.cwiseProduct(slack))) : 0.0;
  return k;
}

Feasibility phase_one(const StandardForm& f) {
  const Eigen::Index n = f.c.size(), m = f.h.size(), p = f.b.size();
  const Eigen::Index nv = n + m + 2 * p;
  StandardForm ph;
  ph.H = Matrix::Zero(nv, nv);
  ph.H.topLeftCorner(n, n).diagonal().setConstant(1e-10);
  ph.c = Vector::Zero(nv);
  ph.c.tail(m + 2 * p).setOnes();
  ph.G = Matrix::Zero(2 * m + 2 * p, nv);
  ph.h = Vector::Zero(2 * m + 2 * p);
  if (m) {
    ph.G.topLeftCorner(m, n) = f.G;
    ph.G.block(0, n, m, m) = -Matrix::Identity(m, m);
    ph.h.head(m) = f.h;
  }
  ph.G.block(m, n, m + 2 * p, m + 2 * p) = -Matrix::Identity(m + 2 * p, m + 2 * p);
  ph.A = Matrix::Zero(p, nv);
  ph.b = f.b;
  if (p) {
    ph.A.leftCols(n) = f.A;
    ph.A.block(0, n + m, p, p) = -Matrix::Identity(p, p);
    ph.A.block(0, n + m + p, p, p) = Matrix::Identity(p, p);
  }
  Settings s;
  s.max_iterations = 400;
  const CoreResult r = interior_point(ph, s);
  if (!r.converged) throw RuntimeFailure("qp: phase-1 problem did not converge");

  Feasibility out;
  out.witness = r.x.head(n);
  const Vector viol = (f.G * out.witness - f.h).cwiseMax(0.0);
  out.total_slack = viol.sum() + (f.A * out.witness - f.b).cwiseAbs().sum();
  out.feasible = out.total_slack <= 1e-8;
  return out;
}

}  // namespace

namespace {

/// Variables pinned by single-variable rows, i.e. implicit equalities, leave
/// the QP without a strict interior. They are fixed and eliminated before the
/// interior point iteration.
struct Presolved {
  StandardForm reduced;
  std::vector<Eigen::Index> free_cols;
  std::vector<Eigen::Index> kept_rows;
  Vector x_fixed;                     // full-length, valid on fixed columns
  std::vector<bool> fixed;
  std::vector<Eigen::Index> lower_row;  // tightest singleton lower-bound row per column
  std::vector<Eigen::Index> upper_row;
};

constexpr double kFixTolerance = 1e-9;

std::optional<Presolved> presolve(const StandardForm& f) {
  const Eigen::Index n = f.c.size(), m = f.h.size();
  Presolved ps;
  ps.fixed.assign(n, false);
  ps.x_fixed = Vector::Zero(n);
  ps.lower_row.assign(n, -1);
  ps.upper_row.assign(n, -1);
  std::vector<bool> row_done(m, false);
  Vector rhs = f.h;
  bool any = false;

  for (bool changed = true; changed;) {
    changed = false;
    Vector lo = Vector::Constant(n, -std::numeric_limits<double>::infinity());
    Vector up = Vector::Constant(n, std::numeric_limits<double>::infinity());
    for (Eigen::Index r = 0; r < m; ++r) {
      if (row_done[r]) continue;
      Eigen::Index col = -1, count = 0;
      for (Eigen::Index j = 0; j < n; ++j)
        if (!ps.fixed[j] && f.G(r, j) != 0.0) {
          col = j;
          ++count;
        }
      if (count != 1) continue;
      const double a = f.G(r, col), bound = rhs[r] / a;
      if (a > 0 && bound < up[col]) {
        up[col] = bound;
        ps.upper_row[col] = r;
      } else if (a < 0 && bound > lo[col]) {
        lo[col] = bound;
        ps.lower_row[col] = r;
      }
    }
    // Singleton rows implied by a tighter one on the same side are dropped.
    for (Eigen::Index r = 0; r < m; ++r) {
      if (row_done[r]) continue;
      Eigen::Index col = -1, count = 0;
      for (Eigen::Index j = 0; j < n; ++j)
        if (!ps.fixed[j] && f.G(r, j) != 0.0) {
          col = j;
          ++count;
        }
      if (count != 1 || r == ps.upper_row[col] || r == ps.lower_row[col]) continue;
      row_done[r] = true;
      changed = any = true;
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      if (ps.fixed[j] || !std::isfinite(lo[j]) || !std::isfinite(up[j])) continue;
      const double width = up[j] - lo[j];
      if (width > kFixTolerance * (1.0 + std::abs(lo[j]) + std::abs(up[j]))) continue;
      // A clearly negative width is left to phase 1, which certifies infeasibility.
      if (width < -kFixTolerance * (1.0 + std::abs(lo[j]) + std::abs(up[j]))) return std::nullopt;
      ps.fixed[j] = true;
      ps.x_fixed[j] = 0.5 * (lo[j] + up[j]);
      rhs -= f.G.col(j) * ps.x_fixed[j];
      changed = any = true;
    }
    // Rows without free variables are constants now.
    for (Eigen::Index r = 0; r < m; ++r) {
      if (row_done[r]) continue;
      bool empty = true;
      for (Eigen::Index j = 0; j < n && empty; ++j) empty = ps.fixed[j] || f.G(r, j) == 0.0;
      if (empty && any) row_done[r] = true;
    }
  }
  if (!any) return std::nullopt;

  for (Eigen::Index j = 0; j < n; ++j)
    if (!ps.fixed[j]) ps.free_cols.push_back(j);
  for (Eigen::Index r = 0; r < m; ++r)
    if (!row_done[r]) ps.kept_rows.push_back(r);
  const Eigen::Index nf = ps.free_cols.size(), mk = ps.kept_rows.size(), p = f.b.size();
  if (nf == 0) return std::nullopt;

  StandardForm& g = ps.reduced;
  g.H.resize(nf, nf);
  g.c.resize(nf);
  g.G.resize(mk, nf);
  g.h.resize(mk);
  g.A.resize(p, nf);
  g.b = f.b;
  const Vector Hx = f.H * ps.x_fixed;
  for (Eigen::Index a = 0; a < nf; ++a) {
    const Eigen::Index j = ps.free_cols[a];
    g.c[a] = f.c[j] + Hx[j];
    for (Eigen::Index b = 0; b < nf; ++b) g.H(a, b) = f.H(j, ps.free_cols[b]);
    for (Eigen::Index r = 0; r < mk; ++r) g.G(r, a) = f.G(ps.kept_rows[r], j);
    for (Eigen::Index r = 0; r < p; ++r) g.A(r, a) = f.A(r, j);
  }
  for (Eigen::Index r = 0; r < mk; ++r) g.h[r] = rhs[ps.kept_rows[r]];
  if (p) g.b -= f.A * ps.x_fixed;
  return ps;
}

/// Lifts a reduced solution back; multipliers of the eliminated rows are
/// chosen so that the dual residual of every fixed column vanishes.
CoreResult postsolve(const StandardForm& f, const Presolved& ps, const CoreResult& r) {
  const Eigen::Index n = f.c.size(), m = f.h.size();
  CoreResult out;
  out.converged = r.converged;
  out.iterations = r.iterations;
  out.x = ps.x_fixed;
  for (std::size_t a = 0; a < ps.free_cols.size(); ++a) out.x[ps.free_cols[a]] = r.x[a];
  out.y = r.y;
  out.z = Vector::Zero(m);
  for (std::size_t k = 0; k < ps.kept_rows.size(); ++k) out.z[ps.kept_rows[k]] = r.z[k];
  const Vector rd = f.H * out.x + f.c + f.A.transpose() * out.y + f.G.transpose() * out.z;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (!ps.fixed[j]) continue;
    const Eigen::Index row = rd[j] > 0 ? ps.lower_row[j] : ps.upper_row[j];
    if (row >= 0) out.z[row] = std::max(0.0, -rd[j] / f.G(row, j));
  }
  // Eliminated rows may be violated constants; phase 1 decides then.
  if (m) {
    const double primal_scale = 1.0 + std::max(inf_norm(f.h), inf_norm(f.b));
    if ((f.G * out.x - f.h).maxCoeff() > 1e-9 * primal_scale) out.converged = false;
  }
  return out;
}

}  // namespace

QpSolution solve(const QpProblem& problem, const Settings& settings) {
  const StandardForm f = to_standard(problem);
  // The core works on the objective scaled to unit magnitude so that the
  // returned minimizer does not depend on a positive factor on (H, c).
  StandardForm scaled = f;
  double sigma = std::max(inf_norm(f.H), inf_norm(f.c));
  if (!(sigma > 0.0) || !std::isfinite(sigma)) sigma = 1.0;
  scaled.H /= sigma;
  scaled.c /= sigma;
  CoreResult r;
  if (const auto ps = presolve(scaled)) {
    r = postsolve(scaled, *ps, interior_point(ps->reduced, settings));
  } else {
    r = interior_point(scaled, settings);
  }
  r.y *= sigma;
  r.z *= sigma;

  QpSolution sol;
  sol.iterations = r.iterations;
  sol.x = r.x;
  sol.eq_multipliers = r.y;
  sol.ineq_multipliers = r.z;
  sol.objective = 0.5 * r.x.dot(f.H * r.x) + f.c.dot(r.x);
  sol.kkt = residuals(f, r.x, r.y, r.z);
  if (r.converged) {
    sol.status = Status::optimal;
    return sol;
  }
  sol.status = phase_one(f).feasible ? Status::max_iterations : Status::infeasible;
  return sol;
}

Feasibility check_feasible(const Matrix& G, const Vector& g, const Matrix& A_eq, const Vector& b_eq,
                           const Vector& lower, const Vector& upper) {
  QpProblem p;
  const Eigen::Index n = G.size() ? G.cols() : A_eq.size() ? A_eq.cols()
                                     : lower.size()        ? lower.size()
                                                           : upper.size();
  if (n == 0) throw InputError("check_feasible: no variables");
  p.hessian = Matrix::Zero(n, n);
  p.gradient = Vector::Zero(n);
  p.G = G;
  p.g = g;
  p.A_eq = A_eq;
  p.b_eq = b_eq;
  p.lower = lower;
  p.upper = upper;
  return phase_one(to_standard(p));
}

std::optional<double> maximize_linear(const Vector& a, const Matrix& G, const Vector& g) {
  const Eigen::Index n = a.size();
  if (G.cols() != n || G.rows() != g.size()) throw InputError("maximize_linear: dimension mismatch");
  const Eigen::Index m = G.rows();
  // Bounded iff the dual {λ >= 0 : G'λ = a} is feasible.
  const Feasibility dual = check_feasible(Matrix(0, m), Vector(0), G.transpose(), a,
                                          Vector::Zero(m), Vector());
  if (!dual.feasible) {
    if (!check_feasible(G, g).feasible) throw RuntimeFailure("maximize_linear: empty polytope");
    return std::nullopt;
  }
  QpProblem lp;
  lp.hessian = Matrix::Identity(n, n) * 1e-12;
  lp.gradient = -a;
  lp.G = G;
  lp.g = g;
  const QpSolution sol = solve(lp);
  if (sol.status == Status::infeasible) throw RuntimeFailure("maximize_linear: empty polytope");
  if (sol.status != Status::optimal) throw RuntimeFailure("maximize_linear: LP did not converge");
  return a.dot(sol.x);
}

}  // namespace smpc::qp
