#include "smpc/controller.hpp"

#include <sstream>

#include "smpc/errors.hpp"

namespace smpc {

namespace {

std::string describe(const Vector& v) {
  std::ostringstream os;
  os.precision(17);
  os << "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << "]";
  return os.str();
}

struct Solved {
  OcpSolution solution;
  bool qp_solved = false;
};

/// Solves the surrogate problem in the given ξ mode; the unconstrained
/// optimum is used whenever it is feasible.
std::optional<Solved> solve_ocp(const TightenedProblem& tp, const Vector& x, const Vector& z1_prev,
                                XiMode mode) {
  const Vector z0 = mode.is_free() ? x : x + *mode.fixed * (z1_prev - x);
  if (auto s = unconstrained_solution(tp, z0)) {
    s->xi = mode.is_free() ? 0.0 : *mode.fixed;
    return Solved{std::move(*s), false};
  }
  const qp::QpProblem qp = assemble(tp, x, z1_prev, mode);
  const qp::QpSolution sol = qp::solve(qp);
  if (sol.status == qp::Status::infeasible) return std::nullopt;
  if (sol.status != qp::Status::optimal)
    throw RuntimeFailure("controller: QP solver hit the iteration cap at x = " + describe(x) +
                         ", z1_prev = " + describe(z1_prev));
  return Solved{extract(tp, x, z1_prev, mode, sol), true};
}

bool feasible_pinned(const TightenedProblem& tp, const Vector& x, const Vector& z1_prev, double xi) {
  const Vector z0 = x + xi * (z1_prev - x);
  if (unconstrained_solution(tp, z0)) return true;
  const qp::QpProblem qp = assemble(tp, x, z1_prev, XiMode::pinned(xi));
  return qp::check_feasible(qp.G, qp.g).feasible;
}

}  // namespace

ControllerState init(const TightenedProblem& tp, Variant variant, const Vector& x0) {
  if (x0.size() != tp.nx()) throw InputError("controller init: x0 has the wrong dimension");
  if (!x0.allFinite()) throw InputError("controller init: x0 is not finite");
  ControllerState state;
  state.variant = variant;
  state.z1_prev = x0;
  if (variant != Variant::lqr && !feasible_pinned(tp, x0, x0, 0.0))
    throw DesignInfeasible("x0 outside initially feasible region: x0 = " + describe(x0));
  return state;
}

ControllerState init(const TightenedProblem& tp, Variant variant, const Vector& x0,
                     const Vector& z1_init) {
  if (x0.size() != tp.nx() || z1_init.size() != tp.nx())
    throw InputError("controller init: state has the wrong dimension");
  if (!x0.allFinite() || !z1_init.allFinite()) throw InputError("controller init: state is not finite");
  ControllerState state;
  state.variant = variant;
  state.z1_prev = z1_init;
  if (variant == Variant::lqr) return state;
  if (unconstrained_solution(tp, x0)) return state;
  const qp::QpProblem qp = assemble(tp, x0, z1_init, XiMode::free());
  if (!qp::check_feasible(qp.G, qp.g, {}, {}, qp.lower, qp.upper).feasible)
    throw DesignInfeasible("surrogate problem infeasible at x0 = " + describe(x0) +
                           " with z1(-1) = " + describe(z1_init));
  return state;
}

std::optional<Vector> closest_initial_state(const TightenedProblem& tp, const Vector& x) {
  if (x.size() != tp.nx()) throw InputError("closest_initial_state: wrong dimension");
  if (unconstrained_solution(tp, x) || feasible_pinned(tp, x, x, 0.0)) return x;
  // Decision vector (v, z_0); minimize ||z_0 - x||².
  const Eigen::Index nv = tp.horizon() * tp.nu(), nx = tp.nx();
  qp::QpProblem qp;
  qp.hessian = Matrix::Zero(nv + nx, nv + nx);
  qp.hessian.diagonal().head(nv).setConstant(2.0 * kXiRegularization);
  qp.hessian.diagonal().tail(nx).setConstant(2.0);
  qp.gradient = Vector::Zero(nv + nx);
  qp.gradient.tail(nx) = -2.0 * x;
  qp.G.resize(tp.ineq_rhs().size(), nv + nx);
  qp.G << tp.ineq_v(), tp.ineq_z0();
  qp.g = tp.ineq_rhs();
  const qp::QpSolution sol = qp::solve(qp);
  if (sol.status == qp::Status::infeasible) return std::nullopt;
  if (sol.status != qp::Status::optimal) throw RuntimeFailure("closest_initial_state: QP did not converge");
  return Vector(sol.x.tail(nx));
}

StepResult step(const TightenedProblem& tp, const ControllerState& state, const Vector& x) {
  if (x.size() != tp.nx() || !x.allFinite()) throw RuntimeFailure("controller step: invalid state " + describe(x));
  StepResult out;
  out.state = state;
  out.state.step_index = state.step_index + 1;
  const Matrix& K = tp.design().K;

  if (state.variant == Variant::lqr) {
    out.u = K * x;
    return out;
  }

  std::optional<Solved> solved;
  switch (state.variant) {
    case Variant::ic:
    case Variant::lxi: {
      const double penalty = state.variant == Variant::lxi ? tp.xi_penalty() : 0.0;
      solved = solve_ocp(tp, x, state.z1_prev, XiMode::free(penalty));
      if (!solved)
        throw InternalError("controller: surrogate problem infeasible although the shifted "
                            "candidate must be feasible; x = " + describe(x) +
                            ", z1_prev = " + describe(state.z1_prev));
      break;
    }
    case Variant::bak: {
      if (feasible_pinned(tp, x, state.z1_prev, 0.0)) solved = solve_ocp(tp, x, state.z1_prev, XiMode::pinned(0.0));
      if (!solved) {
        out.diagnostics.backup_branch = true;
        solved = solve_ocp(tp, x, state.z1_prev, XiMode::pinned(1.0));
      }
      if (!solved)
        throw InternalError("controller: backup branch z0 = z1_prev infeasible; x = " + describe(x) +
                            ", z1_prev = " + describe(state.z1_prev));
      break;
    }
    case Variant::lqr:
      break;
  }

  const OcpSolution& s = solved->solution;
  const Vector e = x - s.z[0];
  out.u = s.v[0] + K * e;
  out.state.z1_prev = s.z[1];
  out.diagnostics.has_xi = true;
  out.diagnostics.xi = s.xi;
  out.diagnostics.objective = s.objective;
  out.diagnostics.status = s.status;
  out.diagnostics.qp_solved = solved->qp_solved;
  out.diagnostics.qp_iterations = s.qp_iterations;
  out.state.last_solution = std::move(solved->solution);
  return out;
}

double xi_zero_fraction(std::span<const StepDiagnostics> log) {
  if (log.empty()) throw InputError("xi_zero_fraction: empty log");
  std::size_t zero = 0;
  for (const auto& d : log) {
    if (!d.has_xi) throw InputError("xi_zero_fraction: log has no xi (LQR run)");
    zero += d.xi <= kXiZeroThreshold ? 1 : 0;
  }
  return static_cast<double>(zero) / static_cast<double>(log.size());
}

}  // namespace smpc
