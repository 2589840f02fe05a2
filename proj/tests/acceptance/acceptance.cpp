// Acceptance suite for the DC-DC benchmark and the solver property checks.
// Prints one PASS/FAIL line per criterion and exits nonzero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "../qp_oracle.hpp"
#include "smpc/controller.hpp"
#include "smpc/dcdc.hpp"
#include "smpc/errors.hpp"
#include "smpc/ocp.hpp"
#include "smpc/qp.hpp"
#include "smpc/report.hpp"
#include "smpc/sets.hpp"
#include "smpc/sim.hpp"
#include "smpc/uncertainty.hpp"

namespace {

using namespace smpc;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

struct Outcome {
  bool pass = true;
  std::vector<std::string> details;
  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    details.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
};

int failures = 0;

void report(int id, const std::string& name, const Outcome& o, double secs) {
  std::printf("%s %d %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), secs);
  for (const auto& d : o.details) std::printf("       %s\n", d.c_str());
  std::fflush(stdout);
  failures += o.pass ? 0 : 1;
}

void run_criterion(int id, const std::string& name, const std::function<void(Outcome&)>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    body(o);
  } catch (const std::exception& e) {
    o.check(false, std::string("exception: ") + e.what());
  }
  report(id, name, o, seconds_since(t0));
}

double binomial_sigma(double p, double n) { return std::sqrt(p * (1.0 - p) / n); }

bool rows_match(const Polytope& computed, const Polytope& published, double h_tol, double b_tol,
                std::vector<std::string>& log) {
  const Polytope c = normalize_leading(computed), p = normalize_leading(published);
  bool all = true;
  auto find = [&](const Polytope& from, Eigen::Index i, const Polytope& in, const char* label) {
    double best = INFINITY, best_b = INFINITY;
    for (Eigen::Index j = 0; j < in.rows(); ++j) {
      const double dh = (from.H.row(i) - in.H.row(j)).cwiseAbs().maxCoeff();
      if (dh < best) {
        best = dh;
        best_b = std::abs(from.h[i] - in.h[j]);
      }
    }
    const bool ok = best <= h_tol && best_b <= b_tol;
    std::ostringstream row;
    for (Eigen::Index k = 0; k < from.dim(); ++k) row << (k ? ", " : "") << from.H(i, k);
    log.push_back(fmt("%s row [%s] <= %.6g: nearest |dH| = %.3g, |db| = %.3g%s", label, row.str().c_str(),
                      from.h[i], best, best_b, ok ? "" : " (no match)"));
    all = all && ok;
  };
  for (Eigen::Index i = 0; i < p.rows(); ++i) find(p, i, c, "published");
  for (Eigen::Index i = 0; i < c.rows(); ++i) find(c, i, p, "computed");
  return all;
}

struct Campaign {
  std::vector<McSummary> summaries;
  std::vector<std::string> errors;  // one per variant, empty when the run completed
  double seconds = 0;
};

Campaign run_campaign(const Problem& base, const OfflineDesign& design, std::size_t runs, int steps,
                      int workers, const std::vector<Variant>& variants, std::uint64_t seed) {
  Campaign c;
  for (Variant v : variants) {
    Problem p = base;
    p.controller.variant = v;
    const TightenedProblem tp = TightenedProblem::from(p, design);
    SimConfig cfg;
    cfg.runs = runs;
    cfg.steps = steps;
    cfg.master_seed = seed;
    cfg.x0 = dcdc::initial_state();
    if (v != Variant::lqr) {
      const auto z = closest_initial_state(tp, cfg.x0);
      if (!z) throw DesignInfeasible("no feasible initial prediction");
      if (*z != cfg.x0) cfg.z1_init = *z;
    }
    const auto t0 = Clock::now();
    try {
      c.summaries.push_back(monte_carlo(tp, v, cfg, workers));
      c.errors.emplace_back();
    } catch (const std::exception& e) {
      McSummary failed;
      failed.variant = v;
      c.summaries.push_back(failed);
      c.errors.emplace_back(e.what());
    }
    c.seconds += seconds_since(t0);
    std::printf("       [campaign %s: %zu runs x %d steps, %.1f s]\n", to_string(v).c_str(), runs, steps,
                seconds_since(t0));
    std::fflush(stdout);
  }
  return c;
}

int default_workers() {
  if (const char* env = std::getenv("SMPC_WORKERS")) return std::max(1, std::atoi(env));
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance suite"};
  std::string scale = "full";
  int workers = default_workers();
  app.add_option("--scale", scale, "smoke or full")->check(CLI::IsMember({"smoke", "full"}));
  app.add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);
  const bool smoke = scale == "smoke";
  const std::size_t campaign_runs = smoke ? dcdc::kSmokeRuns : dcdc::kFullRuns;
  std::printf("acceptance scale=%s workers=%d campaign_runs=%zu\n", scale.c_str(), workers, campaign_runs);

  const Problem problem = dcdc::problem(Variant::lxi);
  const auto t_design = Clock::now();
  const OfflineDesign design = design_offline(problem);
  const double design_seconds = seconds_since(t_design);
  const DesignArtifacts& art = design.artifacts;
  const Vector x0 = dcdc::initial_state();

  run_criterion(1, "tightened state constraint offset", [&](Outcome& o) {
    const Polytope z = normalize_euclidean(design.Z);
    o.check(z.rows() == 1, fmt("%ld tightened row(s)", static_cast<long>(z.rows())));
    o.check(std::abs(z.h[0] - dcdc::kTightenedOffset) <= 5e-4,
            fmt("offset %.6f vs 0.6455 (tol 5e-4)", z.h[0]));
    o.check(design_seconds < 1.0, fmt("offline design %.3f s (< 1 s)", design_seconds));
  });

  run_criterion(2, "terminal set", [&](Outcome& o) {
    const Matrix ref = dcdc::reference_terminal_H();
    const Polytope published{ref, Vector::Constant(ref.rows(), dcdc::kTightenedOffset)};
    std::vector<std::string> log;
    const bool match = rows_match(design.Z_F, published, 1e-3, 5e-4, log);
    for (const auto& l : log) o.details.push_back("     " + l);
    o.check(match, fmt("leading-normalized rows match (H 1e-3, offset 5e-4), %ld computed vs %ld published",
                       static_cast<long>(design.Z_F.rows()), static_cast<long>(ref.rows())));
    o.check(includes(published, design.Z_F), "published set contains computed set");
    o.check(includes(design.Z_F, published), "computed set contains published set");
    o.check(design_seconds < 1.0, fmt("offline design %.3f s (< 1 s)", design_seconds));
  });

  run_criterion(3, "quantiles", [&](Outcome& o) {
    const double q = chi2_quantile(2, 0.6);
    o.check(std::abs(q + 2.0 * std::log(0.4)) <= 1e-10, fmt("chi2_quantile(2, 0.6) = %.17g", q));
    o.check(chebyshev_level(2, 0.6) == 5.0, fmt("chebyshev_level(2, 0.6) = %.17g", chebyshev_level(2, 0.6)));
  });

  const Campaign campaign =
      run_campaign(problem, design, campaign_runs, 50, workers,
                   std::vector<Variant>(dcdc::kVariants.begin(), dcdc::kVariants.end()), 0);
  auto summary = [&](Variant v) -> const McSummary& {
    for (const auto& s : campaign.summaries)
      if (s.variant == v) return s;
    throw InternalError("missing summary");
  };
  auto error = [&](Variant v) -> const std::string& {
    for (std::size_t i = 0; i < campaign.summaries.size(); ++i)
      if (campaign.summaries[i].variant == v) return campaign.errors[i];
    throw InternalError("missing summary");
  };

  run_criterion(4, "LQR violation matches the analytic oracle", [&](Outcome& o) {
    const McSummary& s = summary(Variant::lqr);
    o.check(error(Variant::lqr).empty(), "campaign completed " + error(Variant::lqr));
    const double n = static_cast<double>(s.runs);
    const std::vector<double> exact = lqr_analytic_violation(
        art.A_K, art.sigma_w, problem.constraints.state_set.H.row(0).transpose(),
        problem.constraints.state_set.h[0], x0, 50);
    int bad = 0;
    double worst = 0;
    for (std::size_t k = 0; k < exact.size(); ++k) {
      const double sigma = binomial_sigma(exact[k], n);
      const double z = sigma > 0 ? std::abs(s.violation_per_step[k] - exact[k]) / sigma
                                 : (s.violation_per_step[k] == exact[k] ? 0.0 : INFINITY);
      worst = std::max(worst, z);
      bad += z > 3.0 ? 1 : 0;
    }
    o.check(bad == 0, fmt("per-step agreement within 3 sigma: %d of 50 steps outside (worst %.2f sigma)", bad, worst));
    double band = 0.5;
    if (smoke) band += 300.0 * binomial_sigma(0.9447, n);
    o.check(std::abs(100.0 * s.violation_headline - 94.47) <= band,
            fmt("headline %.3f%% vs 94.47%% (band %.3g pp)", 100.0 * s.violation_headline, band));
  });

  run_criterion(5, "Monte Carlo table reproduction", [&](Outcome& o) {
    for (Variant v : dcdc::kVariants) o.check(error(v).empty(), to_string(v) + " campaign completed " + error(v));
    if (smoke) o.check(campaign.seconds <= 60.0, fmt("smoke campaign %.1f s (<= 60 s)", campaign.seconds));
    else o.details.push_back(fmt("     campaign %.1f s with %d worker(s)", campaign.seconds, workers));
    const auto rows = dcdc::table1(campaign.summaries, art, smoke);
    for (const auto& r : rows) {
      if (r.variant != Variant::lqr)
        o.check(r.violation_pass, fmt("%-3s violation %.3f%% vs %.2f%% (band %.3g)", to_string(r.variant).c_str(),
                                      r.violation, r.published_violation, r.violation_band));
      o.check(r.cost_pass, fmt("%-3s relative cost %.3f%% vs %.2f%% (band %.3g)", to_string(r.variant).c_str(),
                               r.cost, r.published_cost, r.cost_band));
    }
  });

  run_criterion(6, "recursive feasibility", [&](Outcome& o) {
    for (Variant v : {Variant::ic, Variant::lxi, Variant::bak}) {
      const McSummary& s = summary(v);
      o.check(error(v).empty() && s.infeasible_events == 0,
              fmt("%-3s infeasible solves %ld, backup branch taken %ld times %s", to_string(v).c_str(),
                  s.infeasible_events, s.backup_branch_events, error(v).c_str()));
    }
  });

  run_criterion(7, "closed-loop chance constraint", [&](Outcome& o) {
    for (Variant v : {Variant::ic, Variant::lxi, Variant::bak}) {
      const McSummary& s = summary(v);
      if (!error(v).empty()) {
        o.check(false, to_string(v) + " campaign failed");
        continue;
      }
      const double bound = 0.4 + 3.0 * binomial_sigma(0.4, static_cast<double>(s.runs));
      o.check(s.violation_headline <= bound,
              fmt("%-3s max per-step violation %.4f <= %.4f", to_string(v).c_str(), s.violation_headline, bound));
    }
  });

  run_criterion(8, "stability: time-averaged stage cost", [&](Outcome& o) {
    const Campaign c = run_campaign(problem, design, 2000, 500, workers, {Variant::ic, Variant::lxi, Variant::bak}, 1);
    for (std::size_t i = 0; i < c.summaries.size(); ++i) {
      const McSummary& s = c.summaries[i];
      if (!c.errors[i].empty()) {
        o.check(false, to_string(s.variant) + " campaign failed: " + c.errors[i]);
        continue;
      }
      double avg = 0;
      for (double v : s.mean_stage_cost) avg += v;
      avg /= static_cast<double>(s.mean_stage_cost.size());
      o.check(avg <= 1.05 * art.ell_ss, fmt("%-3s average stage cost %.4f <= 1.05 l_ss = %.4f",
                                            to_string(s.variant).c_str(), avg, 1.05 * art.ell_ss));
    }
  });

  run_criterion(9, "cost-function oracle", [&](Outcome& o) {
    const TightenedProblem tp = TightenedProblem::from(problem, design);
    SimConfig cfg;
    cfg.runs = 10000;
    cfg.steps = 200;
    cfg.master_seed = 2;
    cfg.x0 = x0;
    const McSummary s = monte_carlo(tp, Variant::lqr, cfg, workers);
    const double target = x0.dot(art.P * x0);
    o.check(std::abs(s.mean_cost - target) <= 3.0 * s.cost_standard_error,
            fmt("mean offset cost %.4f vs ||x0||_P^2 = %.4f (3 SE = %.4f)", s.mean_cost, target,
                3.0 * s.cost_standard_error));
  });

  run_criterion(10, "property suites", [&](Outcome& o) {
    {
      std::mt19937_64 rng(7);
      int bad = 0, compared = 0;
      for (int trial = 0; trial < 1000; ++trial) {
        const qp::QpProblem p = test::random_qp(rng, false);
        const auto oracle = test::enumerate(p.hessian, p.gradient, p.G, p.g);
        const qp::QpSolution s = qp::solve(p);
        if (!oracle) {
          bad += s.status == qp::Status::infeasible ? 0 : 1;
          continue;
        }
        ++compared;
        bad += (s.status == qp::Status::optimal && (s.x - *oracle).cwiseAbs().maxCoeff() <= 1e-7) ? 0 : 1;
      }
      o.check(bad == 0, fmt("QP vs enumeration oracle: %d of 1000 disagree (%d with a solution)", bad, compared));
    }
    {
      std::mt19937_64 rng(8);
      std::uniform_real_distribution<double> u(-3.0, 3.0);
      int checked = 0, bad = 0;
      while (checked < 1000) {
        const Polytope P{test::random_matrix(rng, 5, 2), Vector::Constant(5, 2.0)};
        const Matrix L = test::random_matrix(rng, 2, 2, 0.3);
        const Ellipsoid E(L * L.transpose() + 0.01 * Matrix::Identity(2, 2), 1.5);
        Polytope Q;
        try {
          Q = pontryagin_diff(P, E);
        } catch (const DesignInfeasible&) {
          continue;
        }
        const Vector z = (Vector(2) << u(rng), u(rng)).finished();
        if (!Q.contains(z, 0.0)) continue;
        const Vector a = test::random_matrix(rng, 2, 1);
        const Vector e = E.shape() * a * std::sqrt(E.level() / a.dot(E.shape() * a));
        bad += P.contains(z + e, 1e-12) ? 0 : 1;
        ++checked;
      }
      o.check(bad == 0, fmt("Pontryagin soundness: %d of 1000 boundary samples escape", bad));
    }
    {
      const Polytope again = mpi_terminal_set(art.A_K, design.Z_F);
      const bool same = includes(again, design.Z_F) && includes(design.Z_F, again);
      const bool inv = includes(Polytope{design.Z_F.H * art.A_K, design.Z_F.h}, design.Z_F);
      o.check(same, "MPI idempotence");
      o.check(inv && includes(design.Z, design.Z_F), "MPI invariance and constraint admissibility");
    }
    {
      Problem p = problem;
      p.controller.variant = Variant::bak;
      const TightenedProblem tp = TightenedProblem::from(p, design);
      SimConfig cfg;
      cfg.runs = 1100;
      cfg.steps = 15;
      cfg.master_seed = 4;
      cfg.x0 = x0;
      cfg.z1_init = *closest_initial_state(tp, x0);
      std::string reference;
      bool identical = true;
      for (int w : {1, 4, 16}) {
        std::vector<RunRecord> recs;
        const McSummary s = monte_carlo(tp, Variant::bak, cfg, w, &recs);
        std::ostringstream os;
        report::write_summary_csv(os, {s});
        report::write_per_step_csv(os, s);
        report::write_trajectories_csv(os, recs);
        if (reference.empty()) reference = os.str();
        else identical = identical && os.str() == reference;
      }
      o.check(identical, "Monte Carlo outputs byte-identical for 1, 4 and 16 workers");
    }
    {
      const TightenedProblem tp = TightenedProblem::from(dcdc::problem(Variant::ic), design);
      const DisturbanceSampler sampler(art.sigma_w);
      const Vector z0 = *closest_initial_state(tp, x0);
      int compared = 0, bad = 0;
      for (int r = 0; r < 40; ++r) {
        Vector x = z0;
        ControllerState st = init(tp, Variant::ic, x);
        for (int k = 0; k < 20; ++k) {
          const qp::QpProblem pinned = assemble(tp, x, st.z1_prev, XiMode::pinned(0.0));
          if (qp::check_feasible(pinned.G, pinned.g).feasible) {
            const qp::QpProblem free = assemble(tp, x, st.z1_prev, XiMode::free());
            const qp::QpSolution a = qp::solve(free), b = qp::solve(pinned);
            if (a.status == qp::Status::optimal && b.status == qp::Status::optimal) {
              const double fa = extract(tp, x, st.z1_prev, XiMode::free(), a).objective;
              const double fb = extract(tp, x, st.z1_prev, XiMode::pinned(0.0), b).objective;
              bad += fa <= fb + 1e-7 * (1.0 + std::abs(fb)) ? 0 : 1;
            } else {
              ++bad;
            }
            ++compared;
          }
          const StepResult res = step(tp, st, x);
          st = res.state;
          x = tp.system().A * x + tp.system().B * res.u +
              sampler.sample(23, static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(k));
        }
      }
      o.check(bad == 0 && compared > 0,
              fmt("relaxation dominance: free xi worse than xi = 0 in %d of %d states", bad, compared));
    }
  });

  std::printf("%s: %d criterion(s) failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
