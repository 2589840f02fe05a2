#pragma once

#include <optional>
#include <vector>

#include "smpc/model.hpp"
#include "smpc/qp.hpp"
#include "smpc/sets.hpp"
#include "smpc/synthesis.hpp"
#include "smpc/uncertainty.hpp"

namespace smpc {

/// Everything computed offline for one problem: LQR design, PRS, tightened
/// sets and terminal set.
struct OfflineDesign {
  DesignArtifacts artifacts;
  Ellipsoid state_prs;
  std::optional<Ellipsoid> input_prs;
  Polytope Z;
  std::optional<Polytope> V;
  Polytope Z_F;
};

OfflineDesign design_offline(const Problem& problem, const MpiOptions& mpi = {});

/// Deterministic surrogate problem in condensed form. Immutable after
/// construction and safe to share between threads.
class TightenedProblem {
 public:
  /// Certifies Z_F ⊆ Z, (A+BK) Z_F ⊆ Z_F and K Z_F ⊆ V; throws
  /// DesignInfeasible otherwise.
  TightenedProblem(LtiSystem system, CostSpec cost, DesignArtifacts design, Polytope Z,
                   std::optional<Polytope> V, Polytope Z_F, int horizon, double xi_penalty,
                   std::optional<Polytope> state_set = std::nullopt);

  static TightenedProblem from(const Problem& problem, const OfflineDesign& design);

  const LtiSystem& system() const { return system_; }
  const CostSpec& cost() const { return cost_; }
  /// Original (untightened) state constraint set, when known.
  const std::optional<Polytope>& state_set() const { return state_set_; }
  const DesignArtifacts& design() const { return design_; }
  const Polytope& Z() const { return Z_; }
  const std::optional<Polytope>& V() const { return V_; }
  const Polytope& Z_F() const { return Z_F_; }
  int horizon() const { return horizon_; }
  double xi_penalty() const { return xi_penalty_; }

  Eigen::Index nx() const { return system_.nx(); }
  Eigen::Index nu() const { return system_.nu(); }

  /// z_i = Phi_i z_0 + Gamma_i v, i = 0..N, with v the stacked inputs.
  const Matrix& phi(int i) const { return phi_[i]; }
  const Matrix& gamma(int i) const { return gamma_[i]; }

  // Condensed blocks, see ocp.cpp.
  const Matrix& c_from_v() const { return c_from_v_; }
  const Matrix& c_from_z0() const { return c_from_z0_; }
  const Matrix& weight() const { return weight_; }
  const Matrix& ineq_v() const { return ineq_v_; }
  const Matrix& ineq_z0() const { return ineq_z0_; }
  const Vector& ineq_rhs() const { return ineq_rhs_; }

 private:
  LtiSystem system_;
  CostSpec cost_;
  std::optional<Polytope> state_set_;
  DesignArtifacts design_;
  Polytope Z_;
  std::optional<Polytope> V_;
  Polytope Z_F_;
  int horizon_;
  double xi_penalty_;

  std::vector<Matrix> phi_;
  std::vector<Matrix> gamma_;
  Matrix c_from_v_;
  Matrix c_from_z0_;
  Matrix weight_;
  Matrix ineq_v_;
  Matrix ineq_z0_;
  Vector ineq_rhs_;
};

/// ξ either a decision variable in [0, 1] or pinned to a value.
struct XiMode {
  std::optional<double> fixed;
  double penalty = 0;  // λ of the linear cost λ ξ, ignored when pinned

  static XiMode free(double penalty = 0) { return {std::nullopt, penalty}; }
  static XiMode pinned(double value) { return {value, 0.0}; }
  bool is_free() const { return !fixed.has_value(); }
};

/// Micro-regularization 1e-10 ξ² that makes ξ unique when the cost is flat.
inline constexpr double kXiRegularization = 1e-10;
inline constexpr double kConstraintTolerance = 1e-7;

struct OcpSolution {
  std::vector<Vector> v;  // v_0..v_{N-1}
  std::vector<Vector> z;  // z_0..z_N
  double xi = 0;
  double objective = 0;   // Σ ||v_i - K z_i||²_{R+B'PB} + λ ξ
  qp::Status status = qp::Status::optimal;
  int qp_iterations = 0;

  Vector c(int i, const Matrix& K) const { return v[i] - K * z[i]; }
};

/// Condensed QP. Decision vector is (v_0, ..., v_{N-1}, ξ), with ξ omitted
/// when pinned.
qp::QpProblem assemble(const TightenedProblem& tp, const Vector& x, const Vector& z1_prev,
                       XiMode mode);

/// Rebuilds the trajectory from a QP solution and checks every invariant of
/// the surrogate problem. Throws InternalError on violation.
OcpSolution extract(const TightenedProblem& tp, const Vector& x, const Vector& z1_prev,
                    XiMode mode, const qp::QpSolution& solution);

/// Trajectory for the given initial state and input sequence.
OcpSolution rollout(const TightenedProblem& tp, const Vector& z0, const std::vector<Vector>& v,
                    double xi);

/// The unconstrained optimum c = 0 from z_0 = x(ξ = 0), if it satisfies all
/// constraints. It is then optimal for every variant since the cost is
/// nonnegative and vanishes there.
std::optional<OcpSolution> unconstrained_solution(const TightenedProblem& tp, const Vector& x);

/// True iff the trajectory satisfies every constraint of the surrogate problem.
bool satisfies_constraints(const TightenedProblem& tp, const OcpSolution& s,
                           double tol = kConstraintTolerance);

/// The previous solution shifted by one step with the terminal input K z_N
/// appended, started at z_0 = z_1(k-1) (ξ = 1).
OcpSolution shifted_candidate(const TightenedProblem& tp, const OcpSolution& previous);

/// ||x||²_P - tr(Σ∞ P) + Σ ||c_i||²_{R+B'PB}.
double predicted_cost(const Vector& x, const std::vector<Vector>& c, const DesignArtifacts& design);

}  // namespace smpc
