#pragma once

#include <array>
#include <iosfwd>
#include <vector>

#include "smpc/model.hpp"
#include "smpc/sim.hpp"

namespace smpc::dcdc {

/// DC-DC converter regulation benchmark: Q = diag(1, 10), R = 10, N = 8,
/// Σ_w = 0.1 I, P(x¹ <= 2) >= 0.6, λ_ξ = 1600.
Problem problem(Variant variant = Variant::ic);

/// Initial state on the border of the initially feasible region.
Vector initial_state();

inline constexpr double kXiPenalty = 1600.0;
inline constexpr double kTightenedOffset = 0.6455;

/// Published terminal set rows, each with offset 0.6455.
Matrix reference_terminal_H();

/// Published Monte Carlo results, in the order lqr, ic, lxi, bak (percent).
inline constexpr std::array<Variant, 4> kVariants = {Variant::lqr, Variant::ic, Variant::lxi,
                                                     Variant::bak};
inline constexpr std::array<double, 4> kViolation = {94.47, 10.79, 9.19, 8.39};
inline constexpr std::array<double, 4> kRelativeCost = {100.00, 109.76, 113.95, 112.95};

/// Tolerance bands of the reproduction (percentage points).
inline constexpr std::array<double, 4> kViolationBand = {0.5, 2.0, 2.0, 2.0};
inline constexpr std::array<double, 4> kCostBand = {1.0, 3.0, 3.0, 3.0};

inline constexpr std::size_t kSmokeRuns = 2'000;
inline constexpr std::size_t kFullRuns = 250'000;

struct Table1Row {
  Variant variant = Variant::lqr;
  double published_violation = 0;
  double violation = 0;  // percent
  double violation_band = 0;
  bool violation_pass = false;
  double published_cost = 0;
  double cost = 0;       // percent
  double cost_band = 0;
  bool cost_pass = false;
};

/// Compares summaries (any order, one per variant in kVariants) with the
/// published values. With `widen` the bands grow by three binomial or
/// cost standard errors, for the reduced-run smoke campaign.
std::vector<Table1Row> table1(const std::vector<McSummary>& summaries, const DesignArtifacts& design,
                              bool widen);

void write_table1_csv(std::ostream& os, const std::vector<Table1Row>& rows);

}  // namespace smpc::dcdc
