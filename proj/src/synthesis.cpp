#include "smpc/synthesis.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace smpc {

namespace {

Matrix riccati_update(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                      const Matrix& P) {
  const Matrix BtP = B.transpose() * P;
  const Matrix S = R + BtP * B;
  const Matrix BtPA = BtP * A;
  Matrix next = Q + A.transpose() * P * A - BtPA.transpose() * S.llt().solve(BtPA);
  return 0.5 * (next + next.transpose());
}

}  // namespace

Matrix solve_dare(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                  const DareOptions& options, long* iterations) {
  Matrix P = Q;
  for (long it = 1; it <= options.max_iterations; ++it) {
    Matrix next = riccati_update(A, B, Q, R, P);
    if (!next.allFinite()) break;
    const double step = (next - P).norm();
    P = std::move(next);
    if (step <= options.tolerance * (1.0 + P.norm())) {
      if (iterations) *iterations = it;
      if (spectral_radius(A + B * lqr_gain(A, B, R, P)) >= 1.0 - 1e-9)
        throw SynthesisError("system not stabilizable or ill-conditioned: Riccati fixed point "
                             "does not stabilize the closed loop");
      return P;
    }
  }
  throw SynthesisError("system not stabilizable or ill-conditioned: Riccati iteration did not converge");
}

Matrix lqr_gain(const Matrix& A, const Matrix& B, const Matrix& R, const Matrix& P) {
  const Matrix S = R + B.transpose() * P * B;
  Eigen::LLT<Matrix> llt(S);
  if (llt.info() != Eigen::Success) throw SynthesisError("lqr_gain: R + B'PB is not positive definite");
  return -llt.solve(B.transpose() * P * A);
}

Matrix solve_dlyap(const Matrix& A_K, const Matrix& W, double tolerance) {
  // S_{j+1} = S_j + M_j S_j M_j', M_{j+1} = M_j²  gives S_j = Σ_{i < 2^j} A^i W A'^i.
  Matrix S = W;
  Matrix M = A_K;
  for (int j = 0; j < 200; ++j) {
    const Matrix inc = M * S * M.transpose();
    S += inc;
    S = 0.5 * (S + S.transpose());
    if (!S.allFinite()) break;
    if (inc.norm() <= tolerance * (1.0 + S.norm())) return S;
    M = M * M;
  }
  throw SynthesisError("Lyapunov iteration did not converge (closed loop not stable)");
}

double steady_state_cost(const Matrix& sigma_inf, const Matrix& Q, const Matrix& R, const Matrix& K) {
  return (sigma_inf * (Q + K.transpose() * R * K)).trace();
}

double spectral_radius(const Matrix& M) {
  return Eigen::EigenSolver<Matrix>(M, false).eigenvalues().cwiseAbs().maxCoeff();
}

double riccati_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                        const Matrix& P) {
  return (P - riccati_update(A, B, Q, R, P)).norm();
}

double lyapunov_residual(const Matrix& A_K, const Matrix& S, const Matrix& W) {
  return (A_K * S * A_K.transpose() - S + W).norm();
}

DesignArtifacts synthesize(const Problem& problem) {
  const auto& A = problem.system.A;
  const auto& B = problem.system.B;
  const auto& Q = problem.cost.Q;
  const auto& R = problem.cost.R;
  const auto& W = problem.disturbance.covariance;

  DesignArtifacts d;
  d.P = solve_dare(A, B, Q, R, {}, &d.dare_iterations);
  d.K = lqr_gain(A, B, R, d.P);
  d.A_K = A + B * d.K;
  d.input_cost = R + B.transpose() * d.P * B;
  d.sigma_w = W;
  d.spectral_radius = spectral_radius(d.A_K);
  d.sigma_inf = solve_dlyap(d.A_K, W);
  d.ell_ss = steady_state_cost(d.sigma_inf, Q, R, d.K);
  d.riccati_residual = riccati_residual(A, B, Q, R, d.P);
  d.lyapunov_residual = lyapunov_residual(d.A_K, d.sigma_inf, W);
  d.trace_P_sigma_w = (d.P * W).trace();
  d.trace_sigma_inf_P = (d.sigma_inf * d.P).trace();

  std::ostringstream err;
  if (d.spectral_radius > 1.0 - 1e-9) err << "spectral radius of A+BK is " << d.spectral_radius << "; ";
  if (d.riccati_residual > 1e-9 * (1.0 + d.P.norm()))
    err << "Riccati residual " << d.riccati_residual << " too large; ";
  if (d.lyapunov_residual > 1e-9 * (1.0 + d.sigma_inf.norm()))
    err << "Lyapunov residual " << d.lyapunov_residual << " too large; ";
  const double scale = std::max({std::abs(d.ell_ss), std::abs(d.trace_P_sigma_w), 1e-300});
  if (std::abs(d.ell_ss - d.trace_P_sigma_w) > 1e-7 * scale)
    err << "tr(S(Q+K'RK)) = " << d.ell_ss << " differs from tr(P W) = " << d.trace_P_sigma_w << "; ";
  if (!err.str().empty()) throw SynthesisError("synthesis certificate failed: " + err.str());
  return d;
}

}  // namespace smpc
