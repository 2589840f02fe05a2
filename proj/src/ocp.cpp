#include "smpc/ocp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "smpc/errors.hpp"

namespace smpc {

OfflineDesign design_offline(const Problem& problem, const MpiOptions& mpi) {
  const Problem p = validate(problem);
  DesignArtifacts artifacts = synthesize(p);
  const bool gaussian = p.disturbance.kind == DisturbanceKind::gaussian;

  Ellipsoid rx = state_prs(artifacts.sigma_inf, p.constraints.state_level, gaussian);
  Polytope Z = pontryagin_diff(p.constraints.state_set, rx);

  std::optional<Ellipsoid> ru;
  std::optional<Polytope> V;
  std::optional<Polytope> KV;
  if (p.constraints.input_set) {
    ru = input_prs(artifacts.K, artifacts.sigma_inf, p.constraints.input_level, gaussian);
    V = pontryagin_diff(*p.constraints.input_set, *ru);
    KV = input_preimage(artifacts.K, *V);
  }
  Polytope Z_F = mpi_terminal_set(artifacts.A_K, Z, KV, mpi);
  return OfflineDesign{std::move(artifacts), std::move(rx), std::move(ru),
                       std::move(Z),         std::move(V),  std::move(Z_F)};
}

TightenedProblem::TightenedProblem(LtiSystem system, CostSpec cost, DesignArtifacts design,
                                   Polytope Z, std::optional<Polytope> V, Polytope Z_F, int horizon,
                                   double xi_penalty, std::optional<Polytope> state_set)
    : system_(std::move(system)),
      cost_(std::move(cost)),
      state_set_(std::move(state_set)),
      design_(std::move(design)),
      Z_(std::move(Z)),
      V_(std::move(V)),
      Z_F_(std::move(Z_F)),
      horizon_(horizon),
      xi_penalty_(xi_penalty) {
  const Eigen::Index nx = system_.nx(), nu = system_.nu();
  const int N = horizon_;
  if (N < 1) throw InputError("TightenedProblem: horizon must be >= 1");
  if (Z_.dim() != nx || Z_F_.dim() != nx || (V_ && V_->dim() != nu))
    throw InputError("TightenedProblem: set dimension mismatch");

  // Certificates: Z_F ⊆ Z, A_K Z_F ⊆ Z_F, K Z_F ⊆ V.
  if (!includes(Z_, Z_F_)) throw DesignInfeasible("terminal set is not contained in Z");
  if (!includes(Polytope{Z_F_.H * design_.A_K, Z_F_.h}, Z_F_))
    throw DesignInfeasible("terminal set is not positively invariant under A + BK");
  if (V_ && !includes(input_preimage(design_.K, *V_), Z_F_))
    throw DesignInfeasible("terminal set violates the tightened input constraint");

  const Eigen::Index nv = N * nu;
  phi_.assign(N + 1, Matrix());
  gamma_.assign(N + 1, Matrix());
  phi_[0] = Matrix::Identity(nx, nx);
  gamma_[0] = Matrix::Zero(nx, nv);
  for (int i = 0; i < N; ++i) {
    phi_[i + 1] = system_.A * phi_[i];
    gamma_[i + 1] = system_.A * gamma_[i];
    gamma_[i + 1].middleCols(i * nu, nu) += system_.B;
  }

  // c = c_from_v v + c_from_z0 z_0, with c_i = v_i - K z_i.
  const Matrix& K = design_.K;
  c_from_v_ = Matrix::Zero(nv, nv);
  c_from_z0_ = Matrix::Zero(nv, nx);
  weight_ = Matrix::Zero(nv, nv);
  for (int i = 0; i < N; ++i) {
    c_from_v_.middleRows(i * nu, nu) = -K * gamma_[i];
    c_from_v_.block(i * nu, i * nu, nu, nu) += Matrix::Identity(nu, nu);
    c_from_z0_.middleRows(i * nu, nu) = -K * phi_[i];
    weight_.block(i * nu, i * nu, nu, nu) = design_.input_cost;
  }

  // ineq_v v + ineq_z0 z_0 <= ineq_rhs.
  const Eigen::Index mz = Z_.rows(), mv = V_ ? V_->rows() : 0, mf = Z_F_.rows();
  const Eigen::Index rows = N * (mz + mv) + mf;
  ineq_v_ = Matrix::Zero(rows, nv);
  ineq_z0_ = Matrix::Zero(rows, nx);
  ineq_rhs_ = Vector::Zero(rows);
  Eigen::Index r = 0;
  for (int i = 0; i < N; ++i) {
    ineq_v_.middleRows(r, mz) = Z_.H * gamma_[i];
    ineq_z0_.middleRows(r, mz) = Z_.H * phi_[i];
    ineq_rhs_.segment(r, mz) = Z_.h;
    r += mz;
  }
  for (int i = 0; i < N && V_; ++i) {
    ineq_v_.block(r, i * nu, mv, nu) = V_->H;
    ineq_rhs_.segment(r, mv) = V_->h;
    r += mv;
  }
  ineq_v_.middleRows(r, mf) = Z_F_.H * gamma_[N];
  ineq_z0_.middleRows(r, mf) = Z_F_.H * phi_[N];
  ineq_rhs_.segment(r, mf) = Z_F_.h;
}

TightenedProblem TightenedProblem::from(const Problem& problem, const OfflineDesign& design) {
  return TightenedProblem(problem.system, problem.cost, design.artifacts, design.Z, design.V,
                          design.Z_F, problem.controller.horizon, problem.controller.xi_penalty,
                          problem.constraints.state_set);
}

qp::QpProblem assemble(const TightenedProblem& tp, const Vector& x, const Vector& z1_prev,
                       XiMode mode) {
  const Eigen::Index nv = tp.horizon() * tp.nu();
  const bool free = mode.is_free();
  const Eigen::Index nd = nv + (free ? 1 : 0);
  const Vector delta = z1_prev - x;

  Matrix L(nv, nd);
  L.leftCols(nv) = tp.c_from_v();
  Vector ref;  // constant part of c
  qp::QpProblem qp;
  qp.G.resize(tp.ineq_rhs().size(), nd);
  qp.G.leftCols(nv) = tp.ineq_v();
  if (free) {
    L.col(nv) = tp.c_from_z0() * delta;
    ref = tp.c_from_z0() * x;
    qp.G.col(nv) = tp.ineq_z0() * delta;
    qp.g = tp.ineq_rhs() - tp.ineq_z0() * x;
  } else {
    const Vector z0 = x + *mode.fixed * delta;
    ref = tp.c_from_z0() * z0;
    qp.g = tp.ineq_rhs() - tp.ineq_z0() * z0;
  }

  const Matrix WL = tp.weight() * L;
  qp.hessian = 2.0 * L.transpose() * WL;
  qp.hessian = 0.5 * (qp.hessian + qp.hessian.transpose()).eval();
  qp.gradient = 2.0 * WL.transpose() * ref;
  if (free) {
    qp.hessian(nv, nv) += 2.0 * kXiRegularization;
    qp.gradient[nv] += mode.penalty;
    qp.lower = Vector::Constant(nd, -std::numeric_limits<double>::infinity());
    qp.upper = Vector::Constant(nd, std::numeric_limits<double>::infinity());
    qp.lower[nv] = 0.0;
    qp.upper[nv] = 1.0;
  }
  return qp;
}

OcpSolution rollout(const TightenedProblem& tp, const Vector& z0, const std::vector<Vector>& v,
                    double xi) {
  OcpSolution s;
  s.v = v;
  s.xi = xi;
  s.z.reserve(v.size() + 1);
  s.z.push_back(z0);
  const Matrix& K = tp.design().K;
  const Matrix& W = tp.design().input_cost;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vector c = v[i] - K * s.z[i];
    s.objective += c.dot(W * c);
    s.z.push_back(tp.system().A * s.z[i] + tp.system().B * v[i]);
  }
  return s;
}

bool satisfies_constraints(const TightenedProblem& tp, const OcpSolution& s, double tol) {
  const int N = tp.horizon();
  if (static_cast<int>(s.v.size()) != N || static_cast<int>(s.z.size()) != N + 1) return false;
  if (s.xi < -tol || s.xi > 1.0 + tol) return false;
  for (int i = 0; i < N; ++i) {
    if (!tp.Z().contains(s.z[i], tol)) return false;
    if (tp.V() && !tp.V()->contains(s.v[i], tol)) return false;
  }
  return tp.Z_F().contains(s.z[N], tol);
}

OcpSolution extract(const TightenedProblem& tp, const Vector& x, const Vector& z1_prev, XiMode mode,
                    const qp::QpSolution& solution) {
  if (solution.status != qp::Status::optimal)
    throw InternalError("extract: QP status is " + std::string(qp::to_string(solution.status)));
  const int N = tp.horizon();
  const Eigen::Index nu = tp.nu();
  const Eigen::Index nv = N * nu;
  std::vector<Vector> v(N);
  for (int i = 0; i < N; ++i) v[i] = solution.x.segment(i * nu, nu);
  double xi = mode.is_free() ? solution.x[nv] : *mode.fixed;
  if (mode.is_free()) xi = std::clamp(xi, 0.0, 1.0);

  const Vector z0 = (1.0 - xi) * x + xi * z1_prev;
  OcpSolution s = rollout(tp, z0, v, xi);
  s.status = solution.status;
  s.qp_iterations = solution.iterations;
  if (mode.is_free()) s.objective += mode.penalty * xi;

  std::ostringstream err;
  if (mode.is_free() && (solution.x[nv] < -kConstraintTolerance || solution.x[nv] > 1.0 + kConstraintTolerance))
    err << "xi = " << solution.x[nv] << " outside [0, 1]; ";
  for (int i = 0; i < N; ++i) {
    const double dyn = (s.z[i + 1] - tp.system().A * s.z[i] - tp.system().B * s.v[i]).cwiseAbs().maxCoeff();
    if (dyn > 1e-9 * (1.0 + s.z[i + 1].cwiseAbs().maxCoeff())) err << "dynamics residual at " << i << "; ";
  }
  if (!satisfies_constraints(tp, s)) err << "constraint violated beyond " << kConstraintTolerance << "; ";
  if (!err.str().empty()) throw InternalError("extract: inconsistent solver output: " + err.str());
  return s;
}

std::optional<OcpSolution> unconstrained_solution(const TightenedProblem& tp, const Vector& x) {
  const int N = tp.horizon();
  const Matrix& K = tp.design().K;
  std::vector<Vector> v;
  v.reserve(N);
  Vector z = x;
  for (int i = 0; i < N; ++i) {
    v.push_back(K * z);
    z = tp.design().A_K * z;
  }
  OcpSolution s = rollout(tp, x, v, 0.0);
  s.objective = 0.0;
  if (!satisfies_constraints(tp, s, 0.0)) return std::nullopt;
  return s;
}

OcpSolution shifted_candidate(const TightenedProblem& tp, const OcpSolution& previous) {
  std::vector<Vector> v(previous.v.begin() + 1, previous.v.end());
  v.push_back(tp.design().K * previous.z.back());
  return rollout(tp, previous.z[1], v, 1.0);
}

double predicted_cost(const Vector& x, const std::vector<Vector>& c, const DesignArtifacts& design) {
  double cost = x.dot(design.P * x) - design.trace_sigma_inf_P;
  for (const auto& ci : c) cost += ci.dot(design.input_cost * ci);
  return cost;
}

}  // namespace smpc
