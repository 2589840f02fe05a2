#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "smpc/ocp.hpp"
#include "smpc/sim.hpp"

namespace smpc::report {

/// "%.17g".
std::string format_double(double value);

/// design_report.toml plus tightened_sets.csv and terminal_set.csv.
void write_design(const Problem& problem, const OfflineDesign& design,
                  const std::filesystem::path& out_dir);
std::string design_toml(const Problem& problem, const OfflineDesign& design);

void write_summary_csv(std::ostream& os, const std::vector<McSummary>& summaries);
void write_per_step_csv(std::ostream& os, const McSummary& summary);
void write_trajectories_csv(std::ostream& os, const std::vector<RunRecord>& records);

/// Writes summary.csv, per_step.csv (per_step_<variant>.csv when more than
/// one summary) and, when records are given, trajectories.csv.
void write_simulation(const std::filesystem::path& out_dir,
                      const std::vector<McSummary>& summaries,
                      const std::vector<RunRecord>* records = nullptr);

}  // namespace smpc::report
