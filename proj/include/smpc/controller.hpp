#pragma once

#include <optional>
#include <span>

#include "smpc/ocp.hpp"

namespace smpc {

struct StepDiagnostics {
  bool has_xi = false;       // false for the LQR variant
  double xi = 0;
  double objective = 0;
  qp::Status status = qp::Status::optimal;
  bool backup_branch = false;  // bak only: z_0 = z_1(k-1) was used
  bool qp_solved = false;      // false when the unconstrained optimum was feasible
  int qp_iterations = 0;
};

struct ControllerState {
  Variant variant = Variant::ic;
  Vector z1_prev;
  long step_index = 0;
  std::optional<OcpSolution> last_solution;
};

struct StepResult {
  Vector u;
  ControllerState state;
  StepDiagnostics diagnostics;
};

/// Initial state with z_1(-1) = x0. Throws DesignInfeasible when the
/// surrogate problem is infeasible at x0 (SMPC variants only).
ControllerState init(const TightenedProblem& tp, Variant variant, const Vector& x0);

/// Initial state with an explicit initial prediction z_1(-1). The surrogate
/// problem must be feasible for some ξ in [0, 1] (SMPC variants only).
ControllerState init(const TightenedProblem& tp, Variant variant, const Vector& x0,
                     const Vector& z1_init);

/// The feasible initial nominal state z_0 closest to x in the Euclidean norm,
/// or nothing when the surrogate problem is infeasible for every z_0.
std::optional<Vector> closest_initial_state(const TightenedProblem& tp, const Vector& x);

/// One closed-loop step. Throws RuntimeFailure when the solver fails and
/// InternalError when a branch that must be feasible is not.
StepResult step(const TightenedProblem& tp, const ControllerState& state, const Vector& x);

/// Threshold below which ξ counts as zero.
inline constexpr double kXiZeroThreshold = 1e-6;

/// Fraction of steps with ξ <= 1e-6. Throws InputError on an empty log or a
/// log without ξ (LQR).
double xi_zero_fraction(std::span<const StepDiagnostics> log);

}  // namespace smpc
