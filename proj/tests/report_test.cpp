#include "smpc/report.hpp"

#include <cmath>
#include <sstream>

#include <gtest/gtest.h>
#include <toml.hpp>

#include "test_support.hpp"

namespace smpc {
namespace {

TEST(Report, FormatDouble) {
  EXPECT_EQ(report::format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(report::format_double(2.0), "2");
  EXPECT_EQ(report::format_double(NAN), "nan");
  EXPECT_EQ(report::format_double(-INFINITY), "-inf");
  const double x = 1.0 / 3.0;
  EXPECT_EQ(std::stod(report::format_double(x)), x);
}

TEST(Report, DesignTomlParsesAndRoundTripsValues) {
  const Problem p = dcdc::problem();
  const auto& d = test::dcdc_design();
  const toml::table t = toml::parse(report::design_toml(p, d));
  EXPECT_EQ(t["cost"]["ell_ss"].value<double>(), d.artifacts.ell_ss);
  EXPECT_EQ(t["lqr"]["K"][0][1].value<double>(), d.artifacts.K(0, 1));
  EXPECT_EQ(t["sets"]["Z_F"]["rows"].value<int64_t>(), d.Z_F.rows());
  EXPECT_EQ(t["prs"]["state"]["level"].value<double>(), d.state_prs.level());
  const double offset = *t["sets"]["Z"]["h_unit_norm"][0].value<double>();
  EXPECT_NEAR(offset, 0.6455, 5e-4);
  EXPECT_FALSE(t["sets"]["V"]);
}

TEST(Report, DesignFiles) {
  const auto dir = test::temp_dir("design");
  report::write_design(dcdc::problem(), test::dcdc_design(), dir);
  const std::string sets = test::read_file(dir / "tightened_sets.csv");
  EXPECT_EQ(sets.rfind("set,normalization,row,H_1,H_2,h\n", 0), 0u);
  EXPECT_NE(sets.find("Z,unit_norm,0,1,0,0.645"), std::string::npos);
  const std::string zf = test::read_file(dir / "terminal_set.csv");
  long lines = 0;
  for (char c : zf) lines += c == '\n';
  EXPECT_EQ(lines, 1 + 2 * test::dcdc_design().Z_F.rows());
  EXPECT_FALSE(test::read_file(dir / "design_report.toml").empty());
}

TEST(Report, SimulationCsvs) {
  McSummary s;
  s.variant = Variant::lxi;
  s.runs = 3;
  s.violation_per_step = {0.5, 0.25};
  s.mean_traj = {Vector::Zero(2), Vector::Ones(2)};
  s.cov_traj = {Matrix::Zero(2, 2), Matrix::Identity(2, 2)};
  s.mean_stage_cost = {1.0, 2.0};
  std::ostringstream per;
  report::write_per_step_csv(per, s);
  EXPECT_EQ(per.str(),
            "step,violation_freq,mean_x1,mean_x2,cov_1_1,cov_1_2,cov_2_1,cov_2_2,mean_stage_cost\n"
            "0,0.5,0,0,0,0,0,0,1\n"
            "1,0.25,1,1,1,0,0,1,2\n");
  std::ostringstream sum;
  report::write_summary_csv(sum, {s});
  EXPECT_EQ(sum.str().substr(0, sum.str().find('\n')),
            "variant,runs,violation_headline,relative_cost,mean_cost,cost_standard_error,"
            "infeasible_events,backup_branch_events,xi_zero_fraction,tail_stage_cost_gap");
  EXPECT_EQ(sum.str().substr(sum.str().find('\n') + 1, 6), "lxi,3,");

  const auto dir = test::temp_dir("sim");
  McSummary s2 = s;
  s2.variant = Variant::ic;
  report::write_simulation(dir, {s, s2});
  EXPECT_TRUE(std::filesystem::exists(dir / "per_step_lxi.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "per_step_ic.csv"));
  EXPECT_FALSE(std::filesystem::exists(dir / "trajectories.csv"));
}

}  // namespace
}  // namespace smpc
