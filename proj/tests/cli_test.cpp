#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <string>

#include <gtest/gtest.h>
#include <sys/wait.h>

#include "test_support.hpp"

namespace smpc {
namespace {

namespace fs = std::filesystem;

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(SMPC_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const std::string kProblem = std::string(SMPC_DATA_DIR) + "/dcdc.toml";

TEST(Cli, Design) {
  const auto dir = test::temp_dir("cli_design");
  EXPECT_EQ(run("design --problem " + kProblem + " --out " + dir.string(), dir / "log"), 0)
      << test::read_file(dir / "log");
  EXPECT_TRUE(fs::exists(dir / "design_report.toml"));
  EXPECT_TRUE(fs::exists(dir / "tightened_sets.csv"));
  EXPECT_TRUE(fs::exists(dir / "terminal_set.csv"));
}

TEST(Cli, SimulateSingleStep) {
  const auto dir = test::temp_dir("cli_sim");
  EXPECT_EQ(run("simulate --problem " + kProblem +
                    " --variant lqr --runs 1 --steps 1 --trajectories --out " + dir.string(),
                dir / "log"),
            0)
      << test::read_file(dir / "log");
  const std::string per = test::read_file(dir / "per_step.csv");
  EXPECT_EQ(std::count(per.begin(), per.end(), '\n'), 2);
  const std::string traj = test::read_file(dir / "trajectories.csv");
  EXPECT_EQ(std::count(traj.begin(), traj.end(), '\n'), 2);
  EXPECT_NE(traj.find("\n0,0,0,0,"), std::string::npos);
}

TEST(Cli, MalformedProblemIsInputError) {
  const auto dir = test::temp_dir("cli_bad");
  std::string text = test::read_file(kProblem);
  const auto pos = text.find("horizon");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, text.find('\n', pos) - pos, "horizon = \"eight\"");
  std::ofstream(dir / "bad.toml") << text;
  EXPECT_EQ(run("design --problem " + (dir / "bad.toml").string() + " --out " + dir.string(), dir / "log"), 1);
  EXPECT_NE(test::read_file(dir / "log").find("controller.horizon"), std::string::npos)
      << test::read_file(dir / "log");
  EXPECT_EQ(run("design --problem " + (dir / "missing.toml").string(), dir / "log2"), 1);
  EXPECT_EQ(run("simulate --problem " + kProblem + " --variant foo", dir / "log3"), 1);
}

TEST(Cli, TighteningInfeasibleExitsTwo) {
  const auto dir = test::temp_dir("cli_infeasible");
  std::string text = test::read_file(kProblem);
  // A much larger disturbance makes the tightened set exclude the origin.
  const auto pos = text.find("[disturbance]");
  ASSERT_NE(pos, std::string::npos);
  const auto cov = text.find("sigma_w", pos);
  ASSERT_NE(cov, std::string::npos);
  text.replace(cov, text.find('\n', cov) - cov, "sigma_w = [[100.0, 0.0], [0.0, 100.0]]");
  std::ofstream(dir / "big.toml") << text;
  EXPECT_EQ(run("design --problem " + (dir / "big.toml").string() + " --out " + dir.string(), dir / "log"), 2)
      << test::read_file(dir / "log");
}

TEST(Cli, OutputsIndependentOfWorkers) {
  std::string ref;
  for (int w : {1, 8}) {
    const auto dir = test::temp_dir("cli_workers" + std::to_string(w));
    ASSERT_EQ(run("simulate --problem " + kProblem + " --variant ic --runs 300 --steps 8 --seed 5 --workers " +
                      std::to_string(w) + " --trajectories --out " + dir.string(),
                  dir / "log"),
              0)
        << test::read_file(dir / "log");
    const std::string all = test::read_file(dir / "summary.csv") + test::read_file(dir / "per_step.csv") +
                            test::read_file(dir / "trajectories.csv");
    if (w == 1) ref = all;
    else EXPECT_EQ(all, ref);
  }
}

}  // namespace
}  // namespace smpc
