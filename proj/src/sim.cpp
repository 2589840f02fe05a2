#include "smpc/sim.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <thread>

#include <Eigen/Cholesky>

#include "smpc/errors.hpp"

namespace smpc {

// ---------------------------------------------------------------------------
// Random numbers

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c,
                                        std::array<std::uint32_t, 2> k) {
  constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(M0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(M1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += W0;
    k[1] += W1;
  }
  return c;
}

namespace {

// 53-bit uniform in [0, 1).
double to_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 21) ^ (lo >> 11);
  return static_cast<double>(bits & ((1ull << 53) - 1)) * 0x1.0p-53;
}

}  // namespace

Vector standard_normal(std::uint64_t master_seed, std::uint64_t run, std::uint64_t step,
                       Eigen::Index n) {
  const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(master_seed),
                                            static_cast<std::uint32_t>(master_seed >> 32)};
  Vector out(n);
  for (Eigen::Index block = 0; 2 * block < n; ++block) {
    const auto r = philox4x32({static_cast<std::uint32_t>(run), static_cast<std::uint32_t>(run >> 32),
                               static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(block)},
                              key);
    // Box-Muller; 1 - u lies in (0, 1].
    const double u1 = 1.0 - to_unit(r[0], r[1]);
    const double u2 = to_unit(r[2], r[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    out[2 * block] = radius * std::cos(angle);
    if (2 * block + 1 < n) out[2 * block + 1] = radius * std::sin(angle);
  }
  return out;
}

DisturbanceSampler::DisturbanceSampler(const Matrix& covariance) {
  if (covariance.rows() != covariance.cols()) throw InputError("DisturbanceSampler: covariance must be square");
  Eigen::LLT<Matrix> llt(covariance);
  if (llt.info() == Eigen::Success) {
    factor_ = llt.matrixL();
    return;
  }
  // Semidefinite: pivoted LDL', factor = P' L sqrt(D).
  Eigen::LDLT<Matrix> ldlt(covariance);
  if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() < -1e-12 * std::max(1.0, covariance.norm())).any())
    throw InputError("DisturbanceSampler: covariance is not positive semidefinite");
  const Vector d = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
  Matrix L = ldlt.matrixL();
  factor_ = ldlt.transpositionsP().transpose() * (L * d.asDiagonal());
}

Vector DisturbanceSampler::sample(std::uint64_t master_seed, std::uint64_t run, std::uint64_t step) const {
  return factor_ * standard_normal(master_seed, run, step, factor_.cols());
}

// ---------------------------------------------------------------------------
// Single run

namespace {

RunRecord run_from(const TightenedProblem& tp, const ControllerState& initial, std::size_t run_index,
                   const SimConfig& config, const DisturbanceSampler& sampler, bool keep_diagnostics,
                   std::vector<StepDiagnostics>* diagnostics) {
  const Matrix& A = tp.system().A;
  const Matrix& B = tp.system().B;
  const Matrix& Q = tp.cost().Q;
  const Matrix& R = tp.cost().R;
  const double ell_ss = tp.design().ell_ss;

  RunRecord rec;
  rec.x.reserve(config.steps);
  rec.u.reserve(config.steps);
  rec.xi.reserve(config.steps);
  rec.stage_cost.reserve(config.steps);

  ControllerState state = initial;
  Vector x = config.x0;
  std::vector<double> costs;
  costs.reserve(config.steps);
  for (int k = 0; k < config.steps; ++k) {
    StepResult r;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      r = step(tp, state, x);
    } catch (const InternalError& e) {
      throw InternalError("run " + std::to_string(run_index) + ", step " + std::to_string(k) + ": " + e.what());
    } catch (const Error& e) {
      throw RuntimeFailure("run " + std::to_string(run_index) + ", step " + std::to_string(k) + ": " + e.what());
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rec.seconds += dt;

    const double stage = x.dot(Q * x) + r.u.dot(R * r.u);
    rec.x.push_back(x);
    rec.u.push_back(r.u);
    rec.xi.push_back(r.diagnostics.has_xi ? r.diagnostics.xi : std::numeric_limits<double>::quiet_NaN());
    rec.stage_cost.push_back(stage);
    costs.push_back(stage - ell_ss);
    rec.backup_branch_events += r.diagnostics.backup_branch ? 1 : 0;
    rec.xi_zero_steps += (r.diagnostics.has_xi && r.diagnostics.xi <= kXiZeroThreshold) ? 1 : 0;
    rec.qp_solves += r.diagnostics.qp_solved ? 1 : 0;
    if (keep_diagnostics && diagnostics) diagnostics->push_back(r.diagnostics);

    x = A * x + B * r.u + sampler.sample(config.master_seed, run_index, static_cast<std::uint64_t>(k));
    state = std::move(r.state);
    state.last_solution.reset();
  }
  rec.cost_sum = pairwise_sum(costs);
  return rec;
}

void check_config(const TightenedProblem& tp, const SimConfig& config) {
  if (config.runs < 1) throw InputError("simulation: runs must be >= 1");
  if (config.steps < 1) throw InputError("simulation: steps must be >= 1");
  if (config.x0.size() != tp.nx()) throw InputError("simulation: x0 has the wrong dimension");
  if (config.z1_init.size() && config.z1_init.size() != tp.nx())
    throw InputError("simulation: z1_init has the wrong dimension");
  if (!tp.state_set() || config.violation_row < 0 || config.violation_row >= tp.state_set()->rows())
    throw InputError("simulation: monitored constraint row out of range");
}

ControllerState initial_state(const TightenedProblem& tp, Variant variant, const SimConfig& config) {
  return config.z1_init.size() ? init(tp, variant, config.x0, config.z1_init) : init(tp, variant, config.x0);
}

}  // namespace

RunRecord simulate_run(const TightenedProblem& tp, Variant variant, std::size_t run_index,
                       const SimConfig& config, const DisturbanceSampler& sampler) {
  check_config(tp, config);
  const ControllerState initial = initial_state(tp, variant, config);
  return run_from(tp, initial, run_index, config, sampler, false, nullptr);
}

// ---------------------------------------------------------------------------
// Aggregation

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

namespace {

/// Mergeable statistics over a set of runs (Chan et al. pairwise update).
struct Partial {
  double count = 0;
  std::vector<long> violations;
  std::vector<Vector> mean;
  std::vector<Matrix> m2;
  std::vector<double> stage_sum;
  double cost_mean = 0;
  double cost_m2 = 0;
  long backup = 0;
  long xi_zero = 0;
  long qp_solves = 0;
  double seconds = 0;
  double seconds_sq = 0;  // Σ per-run (seconds / steps)² * steps
};

Partial leaf(const RunRecord& r, const Polytope& X, Eigen::Index row) {
  Partial p;
  const std::size_t T = r.x.size();
  p.count = 1;
  p.violations.resize(T);
  p.mean = r.x;
  p.m2.assign(T, Matrix::Zero(r.x[0].size(), r.x[0].size()));
  p.stage_sum = r.stage_cost;
  for (std::size_t k = 0; k < T; ++k) p.violations[k] = X.H.row(row).dot(r.x[k]) > X.h[row] ? 1 : 0;
  p.cost_mean = r.cost_sum;
  p.backup = r.backup_branch_events;
  p.xi_zero = r.xi_zero_steps;
  p.qp_solves = r.qp_solves;
  p.seconds = r.seconds;
  const double per_step = r.seconds / static_cast<double>(T);
  p.seconds_sq = per_step * per_step * static_cast<double>(T);
  return p;
}

Partial merge(const Partial& a, const Partial& b) {
  if (a.count == 0) return b;
  if (b.count == 0) return a;
  Partial p;
  p.count = a.count + b.count;
  const double wb = b.count / p.count;
  const double cross = a.count * b.count / p.count;
  const std::size_t T = a.mean.size();
  p.violations.resize(T);
  p.mean.resize(T);
  p.m2.resize(T);
  p.stage_sum.resize(T);
  for (std::size_t k = 0; k < T; ++k) {
    p.violations[k] = a.violations[k] + b.violations[k];
    const Vector delta = b.mean[k] - a.mean[k];
    p.mean[k] = a.mean[k] + wb * delta;
    p.m2[k] = a.m2[k] + b.m2[k] + cross * delta * delta.transpose();
    p.stage_sum[k] = a.stage_sum[k] + b.stage_sum[k];
  }
  const double dc = b.cost_mean - a.cost_mean;
  p.cost_mean = a.cost_mean + wb * dc;
  p.cost_m2 = a.cost_m2 + b.cost_m2 + cross * dc * dc;
  p.backup = a.backup + b.backup;
  p.xi_zero = a.xi_zero + b.xi_zero;
  p.qp_solves = a.qp_solves + b.qp_solves;
  p.seconds = a.seconds + b.seconds;
  p.seconds_sq = a.seconds_sq + b.seconds_sq;
  return p;
}

Partial reduce(std::vector<Partial>& parts, std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) return std::move(parts[lo]);
  const std::size_t mid = lo + (hi - lo) / 2;
  return merge(reduce(parts, lo, mid), reduce(parts, mid, hi));
}

constexpr std::size_t kChunk = 256;

}  // namespace

McSummary monte_carlo(const TightenedProblem& tp, Variant variant, const SimConfig& config,
                      int workers, std::vector<RunRecord>* trajectories) {
  check_config(tp, config);
  const ControllerState initial = initial_state(tp, variant, config);
  const DisturbanceSampler sampler(tp.design().sigma_w);
  const Polytope& X = *tp.state_set();

  const std::size_t chunks = (config.runs + kChunk - 1) / kChunk;
  std::vector<Partial> partials(chunks);
  if (trajectories) trajectories->assign(config.runs, RunRecord{});

  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::mutex error_mutex;
  std::size_t error_chunk = std::numeric_limits<std::size_t>::max();
  std::exception_ptr error;

  auto work = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= chunks || abort.load()) return;
      try {
        const std::size_t begin = c * kChunk, end = std::min(config.runs, begin + kChunk);
        std::vector<Partial> leaves;
        leaves.reserve(end - begin);
        for (std::size_t run = begin; run < end; ++run) {
          RunRecord rec = run_from(tp, initial, run, config, sampler, false, nullptr);
          leaves.push_back(leaf(rec, X, config.violation_row));
          if (trajectories) (*trajectories)[run] = std::move(rec);
        }
        partials[c] = reduce(leaves, 0, leaves.size());
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (c < error_chunk) {
          error_chunk = c;
          error = std::current_exception();
        }
        abort.store(true);
      }
    }
  };

  const int n_workers = std::max(1, std::min<int>(workers, static_cast<int>(chunks)));
  if (n_workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  const Partial total = reduce(partials, 0, partials.size());
  const std::size_t T = static_cast<std::size_t>(config.steps);
  const double n = total.count;

  McSummary s;
  s.variant = variant;
  s.runs = config.runs;
  s.violation_per_step.resize(T);
  s.mean_traj = total.mean;
  s.cov_traj.resize(T);
  s.mean_stage_cost.resize(T);
  for (std::size_t k = 0; k < T; ++k) {
    s.violation_per_step[k] = static_cast<double>(total.violations[k]) / n;
    s.violation_headline = std::max(s.violation_headline, s.violation_per_step[k]);
    s.cov_traj[k] = n > 1 ? Matrix(total.m2[k] / (n - 1)) : Matrix(total.m2[k] * 0.0);
    s.mean_stage_cost[k] = total.stage_sum[k] / n;
  }
  {
    const std::size_t tail = std::min<std::size_t>(5, T);
    double sum = 0;
    for (std::size_t k = T - tail; k < T; ++k) sum += s.mean_stage_cost[k];
    s.tail_stage_cost_gap = std::abs(sum / static_cast<double>(tail) - tp.design().ell_ss);
  }
  s.mean_cost = total.cost_mean;
  s.cost_standard_error = n > 1 ? std::sqrt(total.cost_m2 / (n - 1) / n) : 0.0;
  s.relative_cost = relative_cost(s.mean_cost, tp.design(), config.x0);
  s.backup_branch_events = total.backup;
  s.xi_zero_fraction = variant == Variant::lqr
                           ? std::numeric_limits<double>::quiet_NaN()
                           : static_cast<double>(total.xi_zero) / (n * static_cast<double>(T));
  const double steps_total = n * static_cast<double>(T);
  s.mean_step_seconds = total.seconds / steps_total;
  s.std_step_seconds =
      std::sqrt(std::max(0.0, total.seconds_sq / steps_total - s.mean_step_seconds * s.mean_step_seconds));
  return s;
}

double relative_cost(double mean_cost, const DesignArtifacts& design, const Vector& x0) {
  return 100.0 * mean_cost / x0.dot(design.P * x0);
}

// ---------------------------------------------------------------------------
// Analytic LQR oracle

double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

std::vector<double> lqr_analytic_violation(const Matrix& A_K, const Matrix& sigma_w, const Vector& a,
                                           double b, const Vector& x0, int steps) {
  std::vector<double> out;
  out.reserve(steps);
  Vector mu = x0;
  Matrix S = Matrix::Zero(x0.size(), x0.size());
  for (int k = 0; k < steps; ++k) {
    const double m = a.dot(mu);
    const double var = a.dot(S * a);
    if (var <= 0.0) {
      out.push_back(m > b ? 1.0 : 0.0);
    } else {
      // P(a'x > b) = 1 - Φ((b - m)/σ) computed without cancellation.
      out.push_back(standard_normal_cdf((m - b) / std::sqrt(var)));
    }
    mu = A_K * mu;
    S = A_K * S * A_K.transpose() + sigma_w;
  }
  return out;
}

}  // namespace smpc
