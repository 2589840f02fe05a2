#include "smpc/dcdc.hpp"

#include <cmath>
#include <ostream>

#include "smpc/errors.hpp"
#include "smpc/report.hpp"

namespace smpc::dcdc {

Problem problem(Variant variant) {
  Problem p;
  p.system.A = (Matrix(2, 2) << 1.0, 0.0075, -0.143, 0.996).finished();
  p.system.B = (Matrix(2, 1) << 4.798, 0.115).finished();
  p.disturbance.covariance = 0.1 * Matrix::Identity(2, 2);
  p.disturbance.kind = DisturbanceKind::gaussian;
  p.constraints.state_set.H = (Matrix(1, 2) << 1.0, 0.0).finished();
  p.constraints.state_set.h = (Vector(1) << 2.0).finished();
  p.constraints.state_level = 0.6;
  p.cost.Q = (Matrix(2, 2) << 1.0, 0.0, 0.0, 10.0).finished();
  p.cost.R = (Matrix(1, 1) << 10.0).finished();
  p.controller.horizon = 8;
  p.controller.variant = variant;
  p.controller.xi_penalty = variant == Variant::lxi ? kXiPenalty : 0.0;
  return p;
}

Vector initial_state() { return (Vector(2) << 0.6455, 1.3751).finished(); }

Matrix reference_terminal_H() { return (Matrix(2, 2) << 1.0, 0.0, -0.1559, 1.8933).finished(); }

std::vector<Table1Row> table1(const std::vector<McSummary>& summaries, const DesignArtifacts& design,
                              bool widen) {
  const Vector x0 = initial_state();
  const double x0_cost = x0.dot(design.P * x0);
  std::vector<Table1Row> rows;
  for (std::size_t i = 0; i < kVariants.size(); ++i) {
    const McSummary* s = nullptr;
    for (const auto& candidate : summaries)
      if (candidate.variant == kVariants[i]) s = &candidate;
    if (!s) throw InputError("table1: missing variant " + to_string(kVariants[i]));

    Table1Row r;
    r.variant = kVariants[i];
    r.published_violation = kViolation[i];
    r.violation = 100.0 * s->violation_headline;
    r.violation_band = kViolationBand[i];
    r.published_cost = kRelativeCost[i];
    r.cost = s->relative_cost;
    r.cost_band = kCostBand[i];
    if (widen) {
      const double p = kViolation[i] / 100.0;
      r.violation_band += 300.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(s->runs));
      r.cost_band += 300.0 * s->cost_standard_error / x0_cost;
    }
    r.violation_pass = std::abs(r.violation - r.published_violation) <= r.violation_band;
    r.cost_pass = std::abs(r.cost - r.published_cost) <= r.cost_band;
    rows.push_back(r);
  }
  return rows;
}

void write_table1_csv(std::ostream& os, const std::vector<Table1Row>& rows) {
  using report::format_double;
  os << "variant,published_violation,violation,violation_band,violation_pass,"
        "published_relative_cost,relative_cost,cost_band,cost_pass\n";
  for (const auto& r : rows) {
    os << to_string(r.variant) << ',' << format_double(r.published_violation) << ','
       << format_double(r.violation) << ',' << format_double(r.violation_band) << ','
       << (r.violation_pass ? "pass" : "fail") << ',' << format_double(r.published_cost) << ','
       << format_double(r.cost) << ',' << format_double(r.cost_band) << ','
       << (r.cost_pass ? "pass" : "fail") << '\n';
  }
}

}  // namespace smpc::dcdc
