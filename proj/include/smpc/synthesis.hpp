#pragma once

#include "smpc/model.hpp"

namespace smpc {

/// Offline LQR design and the steady-state statistics of the prestabilized
/// error dynamics e+ = A_K e + w.
struct DesignArtifacts {
  Matrix K;           // u = K x
  Matrix P;           // Riccati solution
  Matrix A_K;         // A + B K
  Matrix sigma_inf;   // steady-state error covariance
  double ell_ss = 0;  // tr(sigma_inf (Q + K' R K))
  Matrix input_cost;  // R + B' P B
  Matrix sigma_w;     // disturbance covariance the design was made for

  // Certificates, recorded at synthesis time.
  double spectral_radius = 0;
  double riccati_residual = 0;
  double lyapunov_residual = 0;
  double trace_P_sigma_w = 0;    // classical LQG average cost, equals ell_ss
  double trace_sigma_inf_P = 0;  // constant subtracted in the predicted cost
  long dare_iterations = 0;
};

struct DareOptions {
  long max_iterations = 1'000'000;
  double tolerance = 1e-13;
};

/// Fixed-point Riccati recursion from P = Q. Throws SynthesisError when the
/// iteration stalls or the resulting closed loop is not stable.
Matrix solve_dare(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                  const DareOptions& options = {}, long* iterations = nullptr);

/// K = -(R + B'PB)^{-1} B'PA.
Matrix lqr_gain(const Matrix& A, const Matrix& B, const Matrix& R, const Matrix& P);

/// Solves A_K S A_K' - S + W = 0 by the doubling recurrence.
Matrix solve_dlyap(const Matrix& A_K, const Matrix& W, double tolerance = 1e-13);

double steady_state_cost(const Matrix& sigma_inf, const Matrix& Q, const Matrix& R,
                         const Matrix& K);

double spectral_radius(const Matrix& M);

/// ||P - (Q + A'PA - A'PB (R + B'PB)^{-1} B'PA)||_F.
double riccati_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                        const Matrix& P);

/// ||A_K S A_K' - S + W||_F.
double lyapunov_residual(const Matrix& A_K, const Matrix& S, const Matrix& W);

/// Full design for a validated problem, with all certificates checked.
DesignArtifacts synthesize(const Problem& problem);

}  // namespace smpc
