#include "smpc/model.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <toml.hpp>

namespace smpc {

ValidationError::ValidationError(std::vector<std::string> violations)
    : InputError([&] {
        std::string msg = "invalid problem:";
        for (const auto& v : violations) msg += "\n  - " + v;
        return msg;
      }()),
      violations_(std::move(violations)) {}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::ic: return "ic";
    case Variant::lxi: return "lxi";
    case Variant::bak: return "bak";
    case Variant::lqr: return "lqr";
  }
  return "?";
}

std::string to_string(DisturbanceKind k) {
  return k == DisturbanceKind::gaussian ? "gaussian" : "moment-only";
}

Variant parse_variant(std::string_view name) {
  if (name == "ic") return Variant::ic;
  if (name == "lxi") return Variant::lxi;
  if (name == "bak") return Variant::bak;
  if (name == "lqr") return Variant::lqr;
  throw InputError("unknown variant '" + std::string(name) + "' (expected ic, lxi, bak or lqr)");
}

DisturbanceKind parse_disturbance_kind(std::string_view name) {
  if (name == "gaussian") return DisturbanceKind::gaussian;
  if (name == "moment-only") return DisturbanceKind::moment_only;
  throw InputError("unknown disturbance kind '" + std::string(name) +
                   "' (expected gaussian or moment-only)");
}

namespace {

bool all_finite(const Matrix& M) { return M.size() == 0 || M.allFinite(); }

bool symmetric(const Matrix& M, double rel) {
  if (M.rows() != M.cols()) return false;
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  return (M - M.transpose()).cwiseAbs().maxCoeff() <= rel * scale;
}

double min_eigenvalue(const Matrix& M) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

void check_polytope(const Polytope& p, Eigen::Index dim, const std::string& name,
                    std::vector<std::string>& out) {
  if (p.H.cols() != dim || p.H.rows() != p.h.size() || p.H.rows() == 0) {
    out.push_back(name + ".dimensions: H must be m x " + std::to_string(dim) +
                  " with m = len(h) >= 1");
    return;
  }
  if (!all_finite(p.H) || !all_finite(p.h)) out.push_back(name + ".finite: non-finite entry");
  for (Eigen::Index j = 0; j < p.rows(); ++j) {
    if (p.H.row(j).cwiseAbs().maxCoeff() == 0.0)
      out.push_back(name + ".row_nonzero: row " + std::to_string(j) + " of H is zero");
    if (!(p.h[j] > 0.0))
      out.push_back(name + ".origin_interior: offset " + std::to_string(j) +
                    " must be > 0 (origin outside the constraint set)");
  }
}

void check_level(double p, const std::string& name, std::vector<std::string>& out) {
  if (p == 1.0) {
    out.push_back(name + ".range: hard chance constraint unsupported (p = 1)");
  } else if (!(p > 0.0 && p < 1.0)) {
    out.push_back(name + ".range: probability must lie in (0, 1)");
  }
}

}  // namespace

std::vector<std::string> check(const Problem& pr) {
  std::vector<std::string> out;
  const auto& sys = pr.system;
  const Eigen::Index nx = sys.A.rows();
  const Eigen::Index nu = sys.B.cols();

  if (nx == 0 || sys.A.cols() != nx) out.push_back("system.dimensions: A must be square and nonempty");
  if (sys.B.rows() != nx || nu == 0) out.push_back("system.dimensions: B must be nx x nu with nu >= 1");
  if (!all_finite(sys.A) || !all_finite(sys.B)) out.push_back("system.finite: non-finite entry in A or B");
  if (!out.empty()) return out;  // everything below depends on nx, nu

  const auto& dist = pr.disturbance.covariance;
  if (dist.rows() != nx || dist.cols() != nx) {
    out.push_back("disturbance.dimensions: sigma_w must be nx x nx");
  } else if (!all_finite(dist)) {
    out.push_back("disturbance.finite: non-finite entry in sigma_w");
  } else {
    const double norm = dist.norm();
    if (!symmetric(dist, 1e-12)) out.push_back("disturbance.symmetric: sigma_w is not symmetric");
    if (min_eigenvalue(dist) < -1e-12 * norm)
      out.push_back("disturbance.psd: sigma_w is not positive semidefinite");
  }
  if (pr.disturbance.mean.size() != 0 &&
      (pr.disturbance.mean.size() != nx || pr.disturbance.mean.cwiseAbs().maxCoeff() != 0.0))
    out.push_back("disturbance.zero_mean: nonzero disturbance mean unsupported");

  const auto& c = pr.constraints;
  check_polytope(c.state_set, nx, "constraints.state", out);
  check_level(c.state_level, "constraints.p_x", out);
  if (c.input_set) {
    check_polytope(*c.input_set, nu, "constraints.input", out);
    check_level(c.input_level, "constraints.p_u", out);
  }

  const auto& cost = pr.cost;
  if (cost.Q.rows() != nx || cost.Q.cols() != nx) {
    out.push_back("cost.dimensions: Q must be nx x nx");
  } else if (!all_finite(cost.Q) || !symmetric(cost.Q, 1e-12) ||
             min_eigenvalue(cost.Q) < -1e-12 * std::max(1.0, cost.Q.norm())) {
    out.push_back("cost.Q_psd: Q must be finite, symmetric and positive semidefinite");
  }
  if (cost.R.rows() != nu || cost.R.cols() != nu) {
    out.push_back("cost.dimensions: R must be nu x nu");
  } else if (!all_finite(cost.R) || !symmetric(cost.R, 1e-12) || !(min_eigenvalue(cost.R) > 0.0)) {
    out.push_back("cost.R_pd: R must be finite, symmetric and positive definite");
  }

  if (pr.controller.horizon < 1) out.push_back("controller.horizon: N must be >= 1");
  if (!(pr.controller.xi_penalty >= 0.0) || !std::isfinite(pr.controller.xi_penalty))
    out.push_back("controller.xi_penalty: must be finite and >= 0");
  return out;
}

Problem validate(const Problem& problem) {
  auto violations = check(problem);
  if (!violations.empty()) throw ValidationError(std::move(violations));
  return problem;
}

// ---------------------------------------------------------------------------
// TOML

namespace {

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& key, const std::string& what,
                         const toml::node* node = nullptr) const {
    std::ostringstream os;
    os << source_;
    if (node && node->source().begin) os << ":" << node->source().begin.line;
    os << ": key '" << key << "': " << what;
    throw InputError(os.str());
  }

  const toml::table& table(const toml::table& root, const std::string& name) const {
    const toml::node* n = root.get(name);
    if (!n) fail(name, "missing section");
    if (!n->is_table()) fail(name, "expected a table", n);
    return *n->as_table();
  }

  void reject_unknown(const toml::table& t, const std::string& prefix,
                      const std::set<std::string>& allowed) const {
    for (const auto& [k, node] : t) {
      const std::string key(k.str());
      if (!allowed.count(key)) fail(prefix.empty() ? key : prefix + "." + key, "unknown key", &node);
    }
  }

  double number(const toml::node& n, const std::string& key) const {
    if (auto v = n.as_floating_point()) return v->get();
    if (auto v = n.as_integer()) return static_cast<double>(v->get());
    fail(key, "expected a number", &n);
  }

  Matrix matrix(const toml::table& t, const std::string& section, const std::string& name) const {
    const std::string key = section + "." + name;
    const toml::node* n = t.get(name);
    if (!n) fail(key, "missing");
    const toml::array* rows = n->as_array();
    if (!rows || rows->empty()) fail(key, "expected a nonempty array of rows", n);
    Matrix M;
    for (std::size_t i = 0; i < rows->size(); ++i) {
      const toml::array* row = (*rows)[i].as_array();
      if (!row || row->empty()) fail(key, "row " + std::to_string(i) + " is not a nonempty array", n);
      if (i == 0) M.resize(static_cast<Eigen::Index>(rows->size()), static_cast<Eigen::Index>(row->size()));
      if (static_cast<Eigen::Index>(row->size()) != M.cols()) fail(key, "ragged matrix", n);
      for (std::size_t j = 0; j < row->size(); ++j)
        M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = number((*row)[j], key);
    }
    return M;
  }

  Vector vector(const toml::table& t, const std::string& section, const std::string& name) const {
    const std::string key = section + "." + name;
    const toml::node* n = t.get(name);
    if (!n) fail(key, "missing");
    const toml::array* arr = n->as_array();
    if (!arr || arr->empty()) fail(key, "expected a nonempty array", n);
    Vector v(static_cast<Eigen::Index>(arr->size()));
    for (std::size_t i = 0; i < arr->size(); ++i) v[static_cast<Eigen::Index>(i)] = number((*arr)[i], key);
    return v;
  }

  double scalar(const toml::table& t, const std::string& section, const std::string& name) const {
    const toml::node* n = t.get(name);
    if (!n) fail(section + "." + name, "missing");
    return number(*n, section + "." + name);
  }

  std::string string(const toml::table& t, const std::string& section, const std::string& name) const {
    const toml::node* n = t.get(name);
    if (!n) fail(section + "." + name, "missing");
    if (!n->is_string()) fail(section + "." + name, "expected a string", n);
    return std::string(n->as_string()->get());
  }

 private:
  std::string source_;
};

}  // namespace

Problem parse_problem(std::string_view text, std::string_view source) {
  const std::string src(source);
  toml::table root;
  try {
    root = toml::parse(text, src);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << src << ":" << e.source().begin.line << ":" << e.source().begin.column
       << ": parse error: " << e.description();
    throw InputError(os.str());
  }
  Reader r(src);
  if (root.empty()) throw InputError(src + ": parse error: empty problem file");
  r.reject_unknown(root, "", {"system", "disturbance", "constraints", "cost", "controller"});

  Problem p;
  const auto& sys = r.table(root, "system");
  r.reject_unknown(sys, "system", {"A", "B"});
  p.system.A = r.matrix(sys, "system", "A");
  p.system.B = r.matrix(sys, "system", "B");

  const auto& dist = r.table(root, "disturbance");
  r.reject_unknown(dist, "disturbance", {"sigma_w", "kind", "mean"});
  p.disturbance.covariance = r.matrix(dist, "disturbance", "sigma_w");
  if (dist.contains("kind")) {
    try {
      p.disturbance.kind = parse_disturbance_kind(r.string(dist, "disturbance", "kind"));
    } catch (const InputError& e) {
      r.fail("disturbance.kind", e.what(), dist.get("kind"));
    }
  }
  if (dist.contains("mean")) p.disturbance.mean = r.vector(dist, "disturbance", "mean");

  const auto& con = r.table(root, "constraints");
  r.reject_unknown(con, "constraints", {"state_H", "state_h", "p_x", "input_H", "input_h", "p_u"});
  p.constraints.state_set.H = r.matrix(con, "constraints", "state_H");
  p.constraints.state_set.h = r.vector(con, "constraints", "state_h");
  p.constraints.state_level = r.scalar(con, "constraints", "p_x");
  const bool has_input = con.contains("input_H") || con.contains("input_h") || con.contains("p_u");
  if (has_input) {
    Polytope U;
    U.H = r.matrix(con, "constraints", "input_H");
    U.h = r.vector(con, "constraints", "input_h");
    p.constraints.input_set = std::move(U);
    p.constraints.input_level = r.scalar(con, "constraints", "p_u");
  }

  const auto& cost = r.table(root, "cost");
  r.reject_unknown(cost, "cost", {"Q", "R"});
  p.cost.Q = r.matrix(cost, "cost", "Q");
  p.cost.R = r.matrix(cost, "cost", "R");

  const auto& ctl = r.table(root, "controller");
  r.reject_unknown(ctl, "controller", {"horizon", "variant", "xi_penalty"});
  const toml::node* hn = ctl.get("horizon");
  if (!hn) r.fail("controller.horizon", "missing");
  if (!hn->is_integer()) r.fail("controller.horizon", "expected an integer", hn);
  p.controller.horizon = static_cast<int>(hn->as_integer()->get());
  if (ctl.contains("variant")) {
    try {
      p.controller.variant = parse_variant(r.string(ctl, "controller", "variant"));
    } catch (const InputError& e) {
      r.fail("controller.variant", e.what(), ctl.get("variant"));
    }
  }
  if (ctl.contains("xi_penalty")) p.controller.xi_penalty = r.scalar(ctl, "controller", "xi_penalty");

  return validate(p);
}

Problem load_problem(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path.string() + ": cannot open problem file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_problem(ss.str(), path.string());
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string toml_matrix(const Matrix& M) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    s += i ? ", [" : "[";
    for (Eigen::Index j = 0; j < M.cols(); ++j) s += (j ? ", " : "") + num(M(i, j));
    s += "]";
  }
  return s + "]";
}

std::string toml_vector(const Vector& v) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v[i]);
  return s + "]";
}

}  // namespace

std::string to_toml(const Problem& p) {
  std::ostringstream os;
  os << "[system]\n"
     << "A = " << toml_matrix(p.system.A) << "\n"
     << "B = " << toml_matrix(p.system.B) << "\n\n"
     << "[disturbance]\n"
     << "sigma_w = " << toml_matrix(p.disturbance.covariance) << "\n"
     << "kind = \"" << to_string(p.disturbance.kind) << "\"\n";
  if (p.disturbance.mean.size()) os << "mean = " << toml_vector(p.disturbance.mean) << "\n";
  os << "\n[constraints]\n"
     << "state_H = " << toml_matrix(p.constraints.state_set.H) << "\n"
     << "state_h = " << toml_vector(p.constraints.state_set.h) << "\n"
     << "p_x = " << num(p.constraints.state_level) << "\n";
  if (p.constraints.input_set) {
    os << "input_H = " << toml_matrix(p.constraints.input_set->H) << "\n"
       << "input_h = " << toml_vector(p.constraints.input_set->h) << "\n"
       << "p_u = " << num(p.constraints.input_level) << "\n";
  }
  os << "\n[cost]\n"
     << "Q = " << toml_matrix(p.cost.Q) << "\n"
     << "R = " << toml_matrix(p.cost.R) << "\n\n"
     << "[controller]\n"
     << "horizon = " << p.controller.horizon << "\n"
     << "variant = \"" << to_string(p.controller.variant) << "\"\n"
     << "xi_penalty = " << num(p.controller.xi_penalty) << "\n";
  return os.str();
}

void save_problem(const Problem& problem, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError(path.string() + ": cannot write problem file");
  out << to_toml(problem);
}

}  // namespace smpc
