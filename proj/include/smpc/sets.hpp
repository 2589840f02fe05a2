#pragma once

#include <optional>

#include "smpc/polytope.hpp"
#include "smpc/uncertainty.hpp"

namespace smpc {

/// P minus E in the Pontryagin sense. For halfspaces this is exact: each
/// offset shrinks by the support value of the ellipsoid in the row direction.
/// Throws DesignInfeasible when a tightened offset is negative.
Polytope pontryagin_diff(const Polytope& P, const Ellipsoid& E);

/// Relative slack used by the redundancy test: b + tol * (1 + |b|).
inline constexpr double kRedundancyTolerance = 1e-9;

/// True iff max over P of a'x <= b + 1e-9 (1 + |b|). Unbounded LPs are
/// reported as not redundant.
bool is_redundant(const Vector& a, double b, const Polytope& P);

/// Rows of `P` that are not implied by the remaining rows, in original order.
Polytope remove_redundant(const Polytope& P);

/// True iff every row of `outer` is redundant with respect to `inner`,
/// i.e. inner is a subset of outer.
bool includes(const Polytope& outer, const Polytope& inner);

bool is_empty(const Polytope& P);

/// True iff max over P of |x_i| is finite for all coordinates.
bool is_bounded(const Polytope& P);

/// Z intersected with {z : H_V K z <= h_V}.
Polytope input_preimage(const Matrix& K, const Polytope& V);

struct MpiOptions {
  int max_rounds = 10'000;
  /// Applied when the constraint set is unbounded: the iteration runs on the
  /// constraint set intersected with the box |z_i| <= bound_scale * r, where r
  /// is the largest distance from the origin to a constraint hyperplane.
  double bound_scale = 100.0;
};

/// Maximal positively invariant set of z+ = A_K z inside Z (and KV when given,
/// already expressed on z). Rows are returned with unit Euclidean norm.
/// Throws DesignInfeasible if the constraint set is empty or the iteration
/// cap is reached.
Polytope mpi_terminal_set(const Matrix& A_K, const Polytope& Z,
                          const std::optional<Polytope>& KV = std::nullopt,
                          const MpiOptions& options = {});

}  // namespace smpc
