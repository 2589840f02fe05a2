// Command-line driver: offline design, Monte Carlo simulation and the DC-DC
// benchmark reproduction.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "smpc/dcdc.hpp"
#include "smpc/errors.hpp"
#include "smpc/ocp.hpp"
#include "smpc/report.hpp"
#include "smpc/sim.hpp"

namespace fs = std::filesystem;
using namespace smpc;

namespace {

struct Options {
  std::string problem;
  std::vector<std::string> variants;
  std::size_t runs = 1000;
  int steps = 50;
  std::uint64_t seed = 0;
  int workers = 0;
  std::string out = ".";
  std::string scale = "smoke";
  bool trajectories = false;
  bool closest_init = false;
};

int default_workers() {
  if (const char* env = std::getenv("SMPC_WORKERS")) {
    try {
      const int w = std::stoi(env);
      if (w >= 1) return w;
    } catch (const std::exception&) {
    }
    throw InputError(std::string("SMPC_WORKERS must be a positive integer, got '") + env + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

Problem require_problem(const Options& o) {
  if (o.problem.empty()) throw InputError("--problem is required");
  return load_problem(o.problem);
}

void print_summary(const McSummary& s) {
  std::printf("%-4s runs=%zu violation=%.4f%% relative_cost=%.4f%% mean_cost=%.6g (se %.3g) "
              "backup=%ld xi_zero=%.4f\n",
              to_string(s.variant).c_str(), s.runs, 100.0 * s.violation_headline, s.relative_cost,
              s.mean_cost, s.cost_standard_error, s.backup_branch_events, s.xi_zero_fraction);
  std::printf("timing %-4s %.4g ms +- %.3g ms per step\n", to_string(s.variant).c_str(),
              1e3 * s.mean_step_seconds, 1e3 * s.std_step_seconds);
}

std::vector<McSummary> run_variants(const Problem& problem, const std::vector<Variant>& variants,
                                    SimConfig config, int workers, bool closest_init,
                                    std::vector<RunRecord>* records) {
  const OfflineDesign design = design_offline(problem);
  std::vector<McSummary> summaries;
  for (Variant v : variants) {
    // λ_ξ only matters for lxi; the rest of the design is shared.
    Problem pv = problem;
    pv.controller.variant = v;
    const TightenedProblem tp = TightenedProblem::from(pv, design);
    if (closest_init && config.z1_init.size() == 0) {
      const auto z = closest_initial_state(tp, config.x0);
      if (!z) throw DesignInfeasible("surrogate problem infeasible for every initial state");
      if (*z != config.x0) {
        std::printf("x0 infeasible with z1(-1) = x0; using z1(-1) = [");
        for (Eigen::Index i = 0; i < z->size(); ++i) std::printf("%s%.17g", i ? ", " : "", (*z)[i]);
        std::printf("]\n");
        config.z1_init = *z;
      }
    }
    summaries.push_back(monte_carlo(tp, v, config, workers, records));
    print_summary(summaries.back());
  }
  return summaries;
}

SimConfig make_config(const Options& o, const Vector& x0) {
  SimConfig c;
  c.runs = o.runs;
  c.steps = o.steps;
  c.master_seed = o.seed;
  c.x0 = x0;
  c.violation_row = 0;
  c.record_trajectories = o.trajectories;
  return c;
}

Vector parse_x0(const std::vector<double>& values, Eigen::Index nx) {
  if (values.empty()) return Vector::Zero(nx);
  if (static_cast<Eigen::Index>(values.size()) != nx)
    throw InputError("--x0 needs " + std::to_string(nx) + " entries");
  return Eigen::Map<const Vector>(values.data(), nx);
}

int cmd_design(const Options& o) {
  const Problem p = require_problem(o);
  const OfflineDesign d = design_offline(p);
  report::write_design(p, d, o.out);
  std::printf("tightened offsets:");
  for (Eigen::Index j = 0; j < d.Z.rows(); ++j) std::printf(" %.6f", normalize_euclidean(d.Z).h[j]);
  std::printf("\nterminal set: %ld rows\nwrote %s\n", static_cast<long>(d.Z_F.rows()),
              (fs::path(o.out) / "design_report.toml").string().c_str());
  return 0;
}

int cmd_simulate(const Options& o, const std::vector<double>& x0, bool compare) {
  Problem p = require_problem(o);
  std::vector<Variant> variants;
  for (const auto& name : o.variants) variants.push_back(parse_variant(name));
  if (variants.empty()) {
    if (compare) variants.assign(dcdc::kVariants.begin(), dcdc::kVariants.end());
    else variants.push_back(p.controller.variant);
  }
  if (!compare && variants.size() != 1) throw InputError("simulate takes a single --variant");
  const SimConfig config = make_config(o, parse_x0(x0, p.system.nx()));
  std::vector<RunRecord> records;
  const auto summaries =
      run_variants(p, variants, config, o.workers, o.closest_init, o.trajectories && !compare ? &records : nullptr);
  report::write_simulation(o.out, summaries, o.trajectories && !compare ? &records : nullptr);
  return 0;
}

int cmd_reproduce(const Options& o) {
  if (o.scale != "smoke" && o.scale != "full") throw InputError("--scale must be smoke or full");
  const bool smoke = o.scale == "smoke";
  Options oo = o;
  oo.runs = smoke ? dcdc::kSmokeRuns : dcdc::kFullRuns;
  const Problem p = dcdc::problem(Variant::lxi);
  const SimConfig config = make_config(oo, dcdc::initial_state());
  const std::vector<Variant> variants(dcdc::kVariants.begin(), dcdc::kVariants.end());
  const auto summaries = run_variants(p, variants, config, o.workers, true, nullptr);
  report::write_simulation(o.out, summaries);

  const auto rows = dcdc::table1(summaries, synthesize(p), smoke);
  std::ofstream os(fs::path(o.out) / "table1_repro.csv", std::ios::binary | std::ios::trunc);
  if (!os) throw InputError("cannot write table1_repro.csv");
  dcdc::write_table1_csv(os, rows);
  dcdc::write_table1_csv(std::cout, rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic MPC with initial-state optimization"};
  app.require_subcommand(1);
  Options o;
  std::vector<double> x0;

  auto add_sim = [&](CLI::App* c) {
    c->add_option("--runs", o.runs, "Monte Carlo runs")->check(CLI::PositiveNumber);
    c->add_option("--steps", o.steps, "steps per run")->check(CLI::PositiveNumber);
    c->add_option("--seed", o.seed, "master seed");
    c->add_flag("--closest-init", o.closest_init,
                "if x0 is infeasible, start from the closest feasible initial prediction");
    c->add_option("--workers", o.workers, "worker threads (default $SMPC_WORKERS)")
        ->check(CLI::PositiveNumber);
  };

  auto* design = app.add_subcommand("design", "offline design report");
  design->add_option("--problem", o.problem, "problem TOML file")->required();
  design->add_option("--out", o.out, "output directory");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo simulation of one variant");
  simulate->add_option("--problem", o.problem, "problem TOML file")->required();
  simulate->add_option("--variant", o.variants, "ic, lxi, bak or lqr")->expected(1);
  simulate->add_option("--x0", x0, "initial state (default 0)");
  simulate->add_flag("--trajectories", o.trajectories, "write trajectories.csv");
  simulate->add_option("--out", o.out, "output directory");
  add_sim(simulate);

  auto* compare = app.add_subcommand("compare", "Monte Carlo simulation of several variants");
  compare->add_option("--problem", o.problem, "problem TOML file")->required();
  compare->add_option("--variant", o.variants, "variants (default all)");
  compare->add_option("--x0", x0, "initial state (default 0)");
  compare->add_option("--out", o.out, "output directory");
  add_sim(compare);

  auto* reproduce = app.add_subcommand("reproduce-dcdc", "DC-DC converter benchmark");
  reproduce->add_option("--scale", o.scale, "smoke (2000 runs) or full (250000 runs)");
  reproduce->add_option("--steps", o.steps, "steps per run")->check(CLI::PositiveNumber);
  reproduce->add_option("--seed", o.seed, "master seed");
  reproduce->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
  reproduce->add_option("--out", o.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (o.workers == 0) o.workers = default_workers();
    if (*design) return cmd_design(o);
    if (*simulate) return cmd_simulate(o, x0, false);
    if (*compare) return cmd_simulate(o, x0, true);
    if (*reproduce) return cmd_reproduce(o);
  } catch (const InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const DesignInfeasible& e) {
    std::fprintf(stderr, "design infeasible: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime failure: %s\n", e.what());
    return 3;
  }
  return 0;
}
