#pragma once

#include "stosdp/block_sdp.hpp"
#include "stosdp/problem.hpp"

#include <optional>
#include <string>
#include <vector>

namespace stosdp {

/// A2: some u makes q - W'u positive definite.
struct A2Result {
  bool holds = false;
  double margin = 0.0;
  Vector witness;
};

/// A1 (complete recourse), decided through the recession cone of M_D.
struct A1Result {
  bool holds = false;
  /// Optimal values of max +-v_i over {v : -W'v psd, |v|_inf <= 1}, ordered (+v_1, -v_1, +v_2, ...).
  std::vector<double> direction_optima;
  /// A nonzero recession direction of M_D when A1 fails.
  std::optional<Vector> recession_direction;
  std::string certificate;
  /// The verdict equals A1 only when A2 holds; otherwise it is informational.
  bool a2_held = false;
};

struct SubgradientInfo {
  Vector u;
  bool unique = false;
  /// Distance between the maximizers at t + eps*r and t - eps*r.
  double certificate = 0.0;
};

struct PhiValue {
  double value = 0.0;
  SubgradientInfo sub;
  SolveStatus status = SolveStatus::Optimal;
};

inline constexpr double kA2MarginTol = 1e-8;
inline constexpr double kA1DirectionTol = 1e-6;
inline constexpr double kUniquenessTol = 1e-5;

/// Tolerances used for every recourse evaluation.
SolverOptions recourse_solver_options();

A2Result check_A2(const ProblemData& p, const SolverOptions& opts = recourse_solver_options());
/// Recession-cone test for A1. Meaningful under A2, which it re-checks and
/// records; RecourseOracle only consults it after check_A2 succeeded.
A1Result check_A1(const ProblemData& p, const SolverOptions& opts = recourse_solver_options());

/// The primal recourse SDP  min q.y  s.t.  W.y = t,  y psd.
BlockSdp recourse_primal_sdp(const ProblemData& p, const Vector& t);

/// Evaluates phi(t) = min{q.y : W.y = t, y psd} = max{t'u : u in M_D} through
/// the dual maximization.
///
/// Construction runs check_A2, then check_A1, then the Lipschitz bound. An
/// oracle whose checks failed refuses to evaluate unless it was built with
/// allow_unverified; evaluation is then attempted anyway and may report
/// infinite values.
class RecourseOracle {
 public:
  explicit RecourseOracle(ProblemData p, SolverOptions opts = recourse_solver_options());
  static RecourseOracle allow_unverified(ProblemData p, SolverOptions opts = recourse_solver_options());

  const ProblemData& problem() const { return p_; }
  const A2Result& a2() const { return a2_; }
  const std::optional<A1Result>& a1() const { return a1_; }
  bool verified() const { return a2_.holds && a1_ && a1_->holds && a1_->a2_held; }
  bool overridden() const { return override_; }

  /// Value and one dual maximizer. `check_unique` costs two extra solves.
  PhiValue eval_phi(const Vector& t, bool check_unique = true) const;

  /// sqrt(s) * max_i max |u_i| over M_D, an upper bound on max_{u in M_D} |u|.
  double lipschitz_bound() const { return lipschitz_; }

  /// c.x + phi(z - T.x).
  double eval_f(const SymMatrix& x, const Vector& z) const;

  /// Q_E(x) = sum_i pi_i f(x, z_i).
  double expected_cost(const ScenarioSet& scen, const SymMatrix& x) const;

  /// One subgradient of Q_E at x: c - sum_i pi_i sum_j (u_i)_j T_j.
  SymMatrix subgrad_QE(const ScenarioSet& scen, const SymMatrix& x) const;

  /// phi at every residual z_i - T.x, in scenario order, computed with up to
  /// `threads` workers. Results do not depend on the thread count.
  std::vector<PhiValue> eval_scenarios(const ScenarioSet& scen, const SymMatrix& x, int threads = 1,
                                       bool check_unique = false) const;

 private:
  struct Unverified {};
  RecourseOracle(ProblemData p, SolverOptions opts, Unverified);
  void require_usable() const;
  void compute_lipschitz();
  Vector solve_dual(const Vector& t, SolveStatus& status, double& value) const;

  ProblemData p_;
  SolverOptions opts_;
  A2Result a2_;
  std::optional<A1Result> a1_;
  double lipschitz_ = 0.0;
  bool override_ = false;
  BlockSdp dual_template_;
};

}  // namespace stosdp
