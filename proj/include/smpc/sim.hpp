#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "smpc/controller.hpp"

namespace smpc {

/// Counter-based normal generator: the draw for (seed, run, step) does not
/// depend on any other draw.
class DisturbanceSampler {
 public:
  /// `covariance` must be symmetric PSD.
  explicit DisturbanceSampler(const Matrix& covariance);

  Vector sample(std::uint64_t master_seed, std::uint64_t run, std::uint64_t step) const;
  const Matrix& factor() const { return factor_; }

 private:
  Matrix factor_;  // lower triangular, factor * factor' = covariance
};

/// Philox4x32-10 block for the given counter and key.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Standard normal vector of length n for (seed, run, step), Box-Muller.
Vector standard_normal(std::uint64_t master_seed, std::uint64_t run, std::uint64_t step,
                       Eigen::Index n);

inline Vector sample_disturbance(std::uint64_t master_seed, std::uint64_t run,
                                 std::uint64_t step, const DisturbanceSampler& sampler) {
  return sampler.sample(master_seed, run, step);
}

struct SimConfig {
  std::size_t runs = 1;
  int steps = 50;
  std::uint64_t master_seed = 0;
  Vector x0;
  /// Initial prediction z_1(-1); empty means x0.
  Vector z1_init;
  Eigen::Index violation_row = 0;
  bool record_trajectories = false;
};

struct RunRecord {
  std::vector<Vector> x;    // x_0..x_{T-1}
  std::vector<Vector> u;    // u_0..u_{T-1}
  std::vector<double> xi;   // NaN for LQR
  std::vector<double> stage_cost;
  double cost_sum = 0;      // Σ (stage - ℓ_ss)
  long backup_branch_events = 0;
  long xi_zero_steps = 0;
  long qp_solves = 0;
  double seconds = 0;       // wall clock spent in the controller
};

RunRecord simulate_run(const TightenedProblem& tp, Variant variant, std::size_t run_index,
                       const SimConfig& config, const DisturbanceSampler& sampler);

struct McSummary {
  Variant variant = Variant::ic;
  std::size_t runs = 0;
  std::vector<double> violation_per_step;
  double violation_headline = 0;     // max over steps
  double mean_cost = 0;              // mean of Σ (stage - ℓ_ss)
  double cost_standard_error = 0;
  double relative_cost = 0;          // 100 · mean_cost / ||x0||²_P
  std::vector<Vector> mean_traj;
  std::vector<Matrix> cov_traj;
  std::vector<double> mean_stage_cost;
  long infeasible_events = 0;
  long backup_branch_events = 0;
  double xi_zero_fraction = 0;       // NaN for LQR
  double tail_stage_cost_gap = 0;    // |mean stage cost over the last 5 steps - ℓ_ss|
  double mean_step_seconds = 0;      // informational, not reproducible
  double std_step_seconds = 0;
};

/// Runs 0..runs-1 in parallel. Every field except the timing ones is
/// bit-identical for any worker count. With `trajectories` non-null the
/// per-run records are returned in run order.
McSummary monte_carlo(const TightenedProblem& tp, Variant variant, const SimConfig& config,
                      int workers, std::vector<RunRecord>* trajectories = nullptr);

/// Exact per-step violation probability of the monitored halfspace a'x <= b
/// under the LQR closed loop with Gaussian noise, from x(0) = x0.
std::vector<double> lqr_analytic_violation(const Matrix& A_K, const Matrix& sigma_w,
                                           const Vector& a, double b, const Vector& x0, int steps);

double standard_normal_cdf(double x);

/// 100 · mean_cost / ||x0||²_P.
double relative_cost(double mean_cost, const DesignArtifacts& design, const Vector& x0);

/// Pairwise (tree) summation; the result depends only on the input order.
double pairwise_sum(std::span<const double> values);

}  // namespace smpc
