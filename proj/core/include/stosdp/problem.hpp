#pragma once

#include "stosdp/sym_matrix.hpp"

#include <optional>
#include <string>
#include <vector>

namespace stosdp {

/// coeff . x = rhs (equality) or coeff . x <= rhs (inequality).
struct MatrixConstraint {
  SymMatrix coeff;
  double rhs = 0.0;
};

/// First-stage feasible set X = { x in S^n_+ : G_k . x = g_k, H_l . x <= h_l, tr(x) <= cap }.
struct Spectrahedron {
  int dim = 1;
  std::vector<MatrixConstraint> equalities;
  std::vector<MatrixConstraint> inequalities;
  std::optional<double> trace_cap;
  /// Set when the caller asserts X is bounded; validation then requires trace_cap.
  bool compact_claimed = false;

  static Spectrahedron psd_cone(int n) { return Spectrahedron{n, {}, {}, std::nullopt, false}; }
  static Spectrahedron trace_ball(int n, double cap) { return Spectrahedron{n, {}, {}, cap, true}; }

  /// tr(x) <= cap together with x in S^n_+ bounds X.
  bool is_compact() const { return trace_cap.has_value(); }
  /// Frobenius radius of X: |x| <= tr(x) <= cap for PSD x.
  double radius() const;
  /// Whether x satisfies all constraints within tol (PSD-ness included).
  bool contains(const SymMatrix& x, double tol) const;
};

/// Data of the parametric SDP  min c.x + q.y  s.t.  T.x + W.y = z, x in X, y in S^m_+.
struct ProblemData {
  int n = 1;
  int m = 1;
  int s = 1;
  SymMatrix c;
  SymMatrix q;
  MatrixTuple T;
  MatrixTuple W;
  Spectrahedron X;
};

struct Scenario {
  double prob = 0.0;
  Vector z;
};

/// Finite discrete law of the right-hand side Z.
struct ScenarioSet {
  std::vector<Scenario> scenarios;

  int size() const { return static_cast<int>(scenarios.size()); }
  const Scenario& operator[](int i) const { return scenarios[static_cast<std::size_t>(i)]; }
  double total_probability() const;
  /// Copy with probabilities divided by their sum. Only applied on request.
  ScenarioSet renormalized() const;
};

struct ValidationIssue {
  enum class Severity { Error, Warning };
  Severity severity = Severity::Error;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  bool empty() const { return issues.empty(); }
  /// No errors (warnings allowed).
  bool ok() const;
  std::vector<std::string> errors() const;
  std::vector<std::string> warnings() const;
  std::string to_string() const;
};

inline constexpr double kProbabilitySumTol = 1e-12;

/// Lists every violated structural invariant; never throws.
ValidationReport validate_problem(const ProblemData& p, const ScenarioSet& scen);

/// Throws std::invalid_argument carrying the report text if validation finds errors.
void require_valid(const ProblemData& p, const ScenarioSet& scen);

}  // namespace stosdp
