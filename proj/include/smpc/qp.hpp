#pragma once

#include <optional>

#include "smpc/polytope.hpp"

namespace smpc::qp {

/// minimize 0.5 x'Hx + g'x  subject to  G x <= b,  A_eq x = b_eq,
///                                      lower <= x <= upper.
/// Empty matrices / vectors mean "no such constraint". Infinite bound entries
/// are ignored.
struct QpProblem {
  Matrix hessian;
  Vector gradient;
  Matrix G;
  Vector g;
  Matrix A_eq;
  Vector b_eq;
  Vector lower;
  Vector upper;

  Eigen::Index size() const { return gradient.size(); }
};

enum class Status { optimal, infeasible, max_iterations };

const char* to_string(Status s);

struct KktResiduals {
  double primal = 0;
  double dual = 0;
  double complementarity = 0;
};

struct QpSolution {
  Status status = Status::max_iterations;
  Vector x;
  double objective = 0;
  KktResiduals kkt;
  int iterations = 0;
  Vector ineq_multipliers;  // for G rows followed by finite lower, then finite upper bounds
  Vector eq_multipliers;
};

struct Settings {
  int max_iterations = 200;
  double tolerance = 1e-12;
};

/// Dense primal-dual interior point (Mehrotra predictor-corrector). An
/// `infeasible` status is only returned when the phase-1 problem certifies it.
QpSolution solve(const QpProblem& problem, const Settings& settings = {});

struct Feasibility {
  bool feasible = false;
  Vector witness;            // minimizer of the phase-1 problem
  double total_slack = 0;    // sum of constraint violations at the witness
};

/// Phase-1 test: minimize the total slack needed to satisfy the constraints.
/// Feasible iff that minimum is at most 1e-8.
Feasibility check_feasible(const Matrix& G, const Vector& g, const Matrix& A_eq = {},
                           const Vector& b_eq = {}, const Vector& lower = {},
                           const Vector& upper = {});

/// max a'x over {x : G x <= g}; empty optional when the LP is unbounded.
/// Throws RuntimeFailure when the polytope is empty.
std::optional<double> maximize_linear(const Vector& a, const Matrix& G, const Vector& g);

}  // namespace smpc::qp
