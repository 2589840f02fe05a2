#include "smpc/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "smpc/errors.hpp"

namespace smpc::report {

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

namespace {

std::string toml_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::string s = format_double(v);
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

std::string toml_vector(const Vector& v) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + toml_double(v[i]);
  return s + "]";
}

std::string toml_matrix(const Matrix& m) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < m.rows(); ++i) s += (i ? ", " : "") + toml_vector(m.row(i).transpose());
  return s + "]";
}

void write_polytope_toml(std::ostream& os, const std::string& name, const Polytope& p) {
  const Polytope e = normalize_euclidean(p);
  const Polytope l = normalize_leading(p);
  os << "\n[sets." << name << "]\n"
     << "rows = " << p.rows() << "\n"
     << "H_unit_norm = " << toml_matrix(e.H) << "\n"
     << "h_unit_norm = " << toml_vector(e.h) << "\n"
     << "H_unit_leading = " << toml_matrix(l.H) << "\n"
     << "h_unit_leading = " << toml_vector(l.h) << "\n";
}

void write_polytope_csv(std::ostream& os, const std::string& name, const Polytope& p) {
  const std::pair<const char*, Polytope> forms[] = {{"unit_norm", normalize_euclidean(p)},
                                                    {"unit_leading", normalize_leading(p)}};
  for (const auto& [label, q] : forms) {
    for (Eigen::Index r = 0; r < q.rows(); ++r) {
      os << name << ',' << label << ',' << r;
      for (Eigen::Index c = 0; c < q.dim(); ++c) os << ',' << format_double(q.H(r, c));
      os << ',' << format_double(q.h[r]) << '\n';
    }
  }
}

void write_polytope_header(std::ostream& os, Eigen::Index n) {
  os << "set,normalization,row";
  for (Eigen::Index c = 0; c < n; ++c) os << ",H_" << c + 1;
  os << ",h\n";
}

std::ofstream open(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw InputError("cannot write " + path.string());
  return os;
}

}  // namespace

std::string design_toml(const Problem& problem, const OfflineDesign& design) {
  const DesignArtifacts& d = design.artifacts;
  std::ostringstream os;
  Eigen::EigenSolver<Matrix> eig(d.A_K);
  const Eigen::VectorXcd ev = eig.eigenvalues();
  Vector re(ev.size()), im(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    re[i] = ev[i].real();
    im[i] = ev[i].imag();
  }

  os << "[lqr]\n"
     << "K = " << toml_matrix(d.K) << "\n"
     << "P = " << toml_matrix(d.P) << "\n"
     << "A_K = " << toml_matrix(d.A_K) << "\n"
     << "A_K_eigenvalues_real = " << toml_vector(re) << "\n"
     << "A_K_eigenvalues_imag = " << toml_vector(im) << "\n"
     << "spectral_radius = " << toml_double(d.spectral_radius) << "\n"
     << "input_cost = " << toml_matrix(d.input_cost) << "\n"
     << "dare_iterations = " << d.dare_iterations << "\n"
     << "\n[covariance]\n"
     << "sigma_w = " << toml_matrix(d.sigma_w) << "\n"
     << "sigma_inf = " << toml_matrix(d.sigma_inf) << "\n"
     << "\n[cost]\n"
     << "ell_ss = " << toml_double(d.ell_ss) << "\n"
     << "trace_P_sigma_w = " << toml_double(d.trace_P_sigma_w) << "\n"
     << "trace_sigma_inf_P = " << toml_double(d.trace_sigma_inf_P) << "\n"
     << "# The predicted cost uses the constant trace_sigma_inf_P; the LQG average\n"
     << "# cost equals trace_P_sigma_w = ell_ss. Only the former is the expected\n"
     << "# value of the ell_ss-offset sum from a deterministic initial state.\n"
     << "\n[residuals]\n"
     << "riccati = " << toml_double(d.riccati_residual) << "\n"
     << "lyapunov = " << toml_double(d.lyapunov_residual) << "\n"
     << "\n[prs.state]\n"
     << "probability = " << toml_double(problem.constraints.state_level) << "\n"
     << "level = " << toml_double(design.state_prs.level()) << "\n"
     << "kind = \"" << to_string(problem.disturbance.kind) << "\"\n";
  if (design.input_prs) {
    os << "\n[prs.input]\n"
       << "probability = " << toml_double(problem.constraints.input_level) << "\n"
       << "level = " << toml_double(design.input_prs->level()) << "\n"
       << "shape = " << toml_matrix(design.input_prs->shape()) << "\n";
  }
  write_polytope_toml(os, "Z", design.Z);
  if (design.V) write_polytope_toml(os, "V", *design.V);
  write_polytope_toml(os, "Z_F", design.Z_F);
  return os.str();
}

void write_design(const Problem& problem, const OfflineDesign& design,
                  const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  open(out_dir / "design_report.toml") << design_toml(problem, design);
  {
    auto os = open(out_dir / "tightened_sets.csv");
    write_polytope_header(os, design.Z.dim());
    write_polytope_csv(os, "Z", design.Z);
    if (design.V) {
      // V lives on the input space; it gets its own header block.
      os << '\n';
      write_polytope_header(os, design.V->dim());
      write_polytope_csv(os, "V", *design.V);
    }
  }
  auto os = open(out_dir / "terminal_set.csv");
  write_polytope_header(os, design.Z_F.dim());
  write_polytope_csv(os, "Z_F", design.Z_F);
}

void write_summary_csv(std::ostream& os, const std::vector<McSummary>& summaries) {
  os << "variant,runs,violation_headline,relative_cost,mean_cost,cost_standard_error,"
        "infeasible_events,backup_branch_events,xi_zero_fraction,tail_stage_cost_gap\n";
  for (const auto& s : summaries) {
    os << to_string(s.variant) << ',' << s.runs << ',' << format_double(s.violation_headline) << ','
       << format_double(s.relative_cost) << ',' << format_double(s.mean_cost) << ','
       << format_double(s.cost_standard_error) << ',' << s.infeasible_events << ','
       << s.backup_branch_events << ',' << format_double(s.xi_zero_fraction) << ','
       << format_double(s.tail_stage_cost_gap) << '\n';
  }
}

void write_per_step_csv(std::ostream& os, const McSummary& s) {
  const Eigen::Index n = s.mean_traj.empty() ? 0 : s.mean_traj[0].size();
  os << "step,violation_freq";
  for (Eigen::Index i = 0; i < n; ++i) os << ",mean_x" << i + 1;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) os << ",cov_" << i + 1 << '_' << j + 1;
  os << ",mean_stage_cost\n";
  for (std::size_t k = 0; k < s.violation_per_step.size(); ++k) {
    os << k << ',' << format_double(s.violation_per_step[k]);
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << format_double(s.mean_traj[k][i]);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) os << ',' << format_double(s.cov_traj[k](i, j));
    os << ',' << format_double(s.mean_stage_cost[k]) << '\n';
  }
}

void write_trajectories_csv(std::ostream& os, const std::vector<RunRecord>& records) {
  if (records.empty() || records[0].x.empty()) {
    os << "run,step\n";
    return;
  }
  const Eigen::Index nx = records[0].x[0].size(), nu = records[0].u[0].size();
  os << "run,step";
  for (Eigen::Index i = 0; i < nx; ++i) os << ",x" << i + 1;
  for (Eigen::Index i = 0; i < nu; ++i) os << ",u" << i + 1;
  os << ",xi\n";
  for (std::size_t r = 0; r < records.size(); ++r) {
    const RunRecord& rec = records[r];
    for (std::size_t k = 0; k < rec.x.size(); ++k) {
      os << r << ',' << k;
      for (Eigen::Index i = 0; i < nx; ++i) os << ',' << format_double(rec.x[k][i]);
      for (Eigen::Index i = 0; i < nu; ++i) os << ',' << format_double(rec.u[k][i]);
      os << ',' << format_double(rec.xi[k]) << '\n';
    }
  }
}

void write_simulation(const std::filesystem::path& out_dir, const std::vector<McSummary>& summaries,
                      const std::vector<RunRecord>* records) {
  std::filesystem::create_directories(out_dir);
  {
    auto os = open(out_dir / "summary.csv");
    write_summary_csv(os, summaries);
  }
  for (const auto& s : summaries) {
    const std::string name =
        summaries.size() == 1 ? "per_step.csv" : "per_step_" + to_string(s.variant) + ".csv";
    auto os = open(out_dir / name);
    write_per_step_csv(os, s);
  }
  if (records) {
    auto os = open(out_dir / "trajectories.csv");
    write_trajectories_csv(os, *records);
  }
}

}  // namespace smpc::report
