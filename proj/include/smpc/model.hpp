#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "smpc/errors.hpp"
#include "smpc/polytope.hpp"

namespace smpc {

/// x(k+1) = A x(k) + B u(k) + w(k).
struct LtiSystem {
  Matrix A;
  Matrix B;

  Eigen::Index nx() const { return A.rows(); }
  Eigen::Index nu() const { return B.cols(); }
};

enum class DisturbanceKind { gaussian, moment_only };

/// i.i.d. additive disturbance, described by its second moment. The mean is
/// carried only so that a nonzero mean can be rejected.
struct DisturbanceModel {
  Matrix covariance;
  DisturbanceKind kind = DisturbanceKind::gaussian;
  Vector mean;  // empty means zero
};

/// P(x in X) >= p_x and, optionally, P(u in U) >= p_u.
struct ChanceSpec {
  Polytope state_set;
  double state_level = 0.0;
  std::optional<Polytope> input_set;
  double input_level = 0.0;
};

struct CostSpec {
  Matrix Q;
  Matrix R;
};

enum class Variant { ic, lxi, bak, lqr };

struct ControllerConfig {
  int horizon = 1;
  Variant variant = Variant::ic;
  double xi_penalty = 0.0;  // slope of the linear xi cost, only used by lxi
};

struct Problem {
  LtiSystem system;
  DisturbanceModel disturbance;
  ChanceSpec constraints;
  CostSpec cost;
  ControllerConfig controller;
};

std::string to_string(Variant v);
std::string to_string(DisturbanceKind k);
/// Throws InputError for unknown names.
Variant parse_variant(std::string_view name);
DisturbanceKind parse_disturbance_kind(std::string_view name);

/// Every violated invariant, by name. Empty when the problem is valid.
std::vector<std::string> check(const Problem& problem);

/// Returns the problem unchanged when it is valid; throws ValidationError
/// listing every violated invariant otherwise.
Problem validate(const Problem& problem);

/// Parses a TOML problem description. `source` only labels error messages.
Problem parse_problem(std::string_view text, std::string_view source = "<string>");
Problem load_problem(const std::filesystem::path& path);

/// TOML text that parse_problem reads back bit-exactly.
std::string to_toml(const Problem& problem);
void save_problem(const Problem& problem, const std::filesystem::path& path);

}  // namespace smpc
