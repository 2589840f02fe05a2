#include "smpc/sets.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "smpc/errors.hpp"
#include "smpc/qp.hpp"

namespace smpc {


bool Polytope::contains(const Vector& x, double tol) const {
  if (x.size() != H.cols()) throw InputError("Polytope::contains: dimension mismatch");
  return ((H * x - h).array() <= tol).all();
}

namespace {

Polytope scale_rows(const Polytope& p, auto&& scale_of) {
  Polytope out = p;
  for (Eigen::Index j = 0; j < p.rows(); ++j) {
    const double s = scale_of(p.H.row(j));
    out.H.row(j) /= s;
    out.h[j] /= s;
  }
  out.H.array() += 0.0;  // -0 -> +0
  return out;
}

}  // namespace

Polytope normalize_euclidean(const Polytope& p) {
  return scale_rows(p, [](const auto& row) { return row.norm(); });
}

Polytope normalize_leading(const Polytope& p) {
  return scale_rows(p, [](const auto& row) {
    for (Eigen::Index i = 0; i < row.size(); ++i)
      if (row[i] != 0.0) return std::abs(row[i]);
    return 1.0;
  });
}

Polytope normalize_dominant(const Polytope& p) {
  return scale_rows(p, [](const auto& row) { return row.cwiseAbs().maxCoeff(); });
}


// ---------------------------------------------------------------------------

Polytope pontryagin_diff(const Polytope& P, const Ellipsoid& E) {
  if (P.dim() != E.dim()) throw InputError("pontryagin_diff: dimension mismatch");
  Polytope out = P;
  for (Eigen::Index j = 0; j < P.rows(); ++j) {
    out.h[j] = P.h[j] - E.support(P.H.row(j).transpose());
    if (out.h[j] < 0.0)
      throw DesignInfeasible("tightening infeasible: constraint " + std::to_string(j) +
                             " (tightened offset " + std::to_string(out.h[j]) +
                             " excludes the origin)");
  }
  return out;
}

bool is_redundant(const Vector& a, double b, const Polytope& P) {
  if (a.size() != P.dim()) throw InputError("is_redundant: dimension mismatch");
  const auto value = qp::maximize_linear(a, P.H, P.h);
  return value && *value <= b + kRedundancyTolerance * (1.0 + std::abs(b));
}

namespace {

Polytope select_rows(const Polytope& P, const std::vector<Eigen::Index>& keep) {
  Polytope out;
  out.H.resize(static_cast<Eigen::Index>(keep.size()), P.dim());
  out.h.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    out.H.row(static_cast<Eigen::Index>(i)) = P.H.row(keep[i]);
    out.h[static_cast<Eigen::Index>(i)] = P.h[keep[i]];
  }
  return out;
}

void append_row(Polytope& P, const Vector& a, double b) {
  const Eigen::Index r = P.rows();
  P.H.conservativeResize(r + 1, a.size());
  P.h.conservativeResize(r + 1);
  P.H.row(r) = a.transpose();
  P.h[r] = b;
}

Polytope stack(const Polytope& a, const Polytope& b) {
  Polytope out;
  out.H.resize(a.rows() + b.rows(), a.dim());
  out.h.resize(a.rows() + b.rows());
  out.H << a.H, b.H;
  out.h << a.h, b.h;
  return out;
}

}  // namespace

Polytope remove_redundant(const Polytope& P) {
  // Drop rows one at a time against the rows still kept; the first of a set
  // of duplicates survives.
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < P.rows(); ++j) keep.push_back(j);
  for (Eigen::Index j = P.rows() - 1; j >= 0; --j) {
    std::vector<Eigen::Index> others;
    for (auto k : keep)
      if (k != j) others.push_back(k);
    if (others.empty()) continue;
    if (is_redundant(P.H.row(j).transpose(), P.h[j], select_rows(P, others))) keep = std::move(others);
  }
  return select_rows(P, keep);
}

bool includes(const Polytope& outer, const Polytope& inner) {
  if (outer.dim() != inner.dim()) throw InputError("includes: dimension mismatch");
  for (Eigen::Index j = 0; j < outer.rows(); ++j)
    if (!is_redundant(outer.H.row(j).transpose(), outer.h[j], inner)) return false;
  return true;
}

bool is_empty(const Polytope& P) { return !qp::check_feasible(P.H, P.h).feasible; }

bool is_bounded(const Polytope& P) {
  for (Eigen::Index i = 0; i < P.dim(); ++i)
    for (double sign : {1.0, -1.0}) {
      const Vector e = sign * Vector::Unit(P.dim(), i);
      if (!qp::maximize_linear(e, P.H, P.h)) return false;
    }
  return true;
}

Polytope input_preimage(const Matrix& K, const Polytope& V) {
  if (V.dim() != K.rows()) throw InputError("input_preimage: dimension mismatch");
  return Polytope{V.H * K, V.h};
}

Polytope mpi_terminal_set(const Matrix& A_K, const Polytope& Z, const std::optional<Polytope>& KV,
                          const MpiOptions& options) {
  const Eigen::Index n = Z.dim();
  if (A_K.rows() != n || A_K.cols() != n || (KV && KV->dim() != n))
    throw InputError("mpi_terminal_set: dimension mismatch");

  Polytope omega = KV ? stack(Z, *KV) : Z;
  if (is_empty(omega)) throw DesignInfeasible("terminal set: constraint set is empty");

  if (!is_bounded(omega)) {
    double r = 0.0;
    for (Eigen::Index j = 0; j < omega.rows(); ++j) r = std::max(r, omega.h[j] / omega.H.row(j).norm());
    const double bound = options.bound_scale * r;
    Polytope box{Matrix(2 * n, n), Vector::Constant(2 * n, bound)};
    box.H << Matrix::Identity(n, n), -Matrix::Identity(n, n);
    omega = stack(omega, box);
  }
  omega = normalize_euclidean(remove_redundant(normalize_euclidean(omega)));

  // Ω_{t+1} = Ω_t ∩ {z : A_K z ∈ Ω_t}. Only preimages of rows added in the
  // previous round can be new.
  Polytope frontier_rows = omega;
  for (int round = 0; round < options.max_rounds; ++round) {
    Polytope added{Matrix(0, n), Vector(0)};
    for (Eigen::Index j = 0; j < frontier_rows.rows(); ++j) {
      Vector a = A_K.transpose() * frontier_rows.H.row(j).transpose();
      double b = frontier_rows.h[j];
      const double norm = a.norm();
      if (norm == 0.0) continue;  // 0 <= b with b > 0
      a /= norm;
      b /= norm;
      if (is_redundant(a, b, omega)) continue;
      append_row(omega, a, b);
      append_row(added, a, b);
    }
    if (added.rows() == 0) return remove_redundant(omega);
    frontier_rows = std::move(added);
  }
  throw DesignInfeasible("terminal set: iteration cap of " + std::to_string(options.max_rounds) +
                         " rounds exceeded");
}

}  // namespace smpc
