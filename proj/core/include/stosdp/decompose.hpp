#pragma once

#include "stosdp/block_sdp.hpp"
#include "stosdp/extensive.hpp"
#include "stosdp/problem.hpp"
#include "stosdp/recourse.hpp"
#include "stosdp/risk.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace stosdp {

enum class RunStatus { Converged, NotConverged };

std::string to_string(RunStatus s);

/// Affine minorant  g.x + offset.  In multi-cut mode it bounds the recourse cost
/// phi(z_i - T.x) of one scenario; an aggregate cut bounds the whole objective.
struct Cut {
  SymMatrix g;
  double offset = 0.0;
  /// Scenario index, or nullopt for an aggregate cut.
  std::optional<int> scenario;
  int iteration = 0;

  double value_at(const SymMatrix& x) const { return g.dot(x) + offset; }
};

/// One line per cut: iteration, scenario (or "aggregate"), offset, then the
/// upper triangle of g row by row, all at 17 significant digits.
std::string format_cut_log(const std::vector<Cut>& cuts);

struct BendersOptions {
  /// Stop when upper - lower <= tol * (1 + |upper|).
  double tol = 1e-7;
  int max_iter = 500;
  /// One aggregate cut per iteration from risk-weighted scenario subgradients.
  bool single_cut = false;
  int threads = 1;
  SolverOptions master;
};

struct BendersIteration {
  int iteration = 0;
  /// Optimal value of this iteration's master problem.
  double master_value = 0.0;
  /// Best lower and upper bounds after the iteration.
  double lower = 0.0;
  double upper = 0.0;
  int cuts_added = 0;
};

struct BendersResult {
  RunStatus status = RunStatus::NotConverged;
  /// Objective at the incumbent (the upper bound).
  double value = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  SymMatrix x = SymMatrix::zero(1);
  /// Recourse cost phi(z_i - T.x) at the incumbent.
  std::vector<double> scenario_costs;
  std::vector<Cut> cuts;
  std::vector<BendersIteration> history;
};

/// Cutting-plane solve of min_x R(c.x + phi(Z - T.x)) over X for Expectation,
/// MeanRisk(EE) and MeanRisk(CVaR). The multi-cut master carries the risk
/// structure exactly and approximates each phi(z_i - T.x) from below.
BendersResult benders_solve(const ProblemData& p, const ScenarioSet& scen, const RiskSpec& spec,
                            const BendersOptions& opts = {});

struct BnbOptions {
  int max_nodes = 10000;
  /// Nodes whose bound is within tol * (1 + |incumbent|) of the incumbent are pruned.
  double tol = 1e-7;
  /// delta within this distance of 0 or 1 counts as integral.
  double integrality_tol = 1e-6;
  SolverOptions sdp = recourse_solver_options();
  BuildOptions build;
};

struct BnbNode {
  int id = 0;
  int parent = -1;
  int depth = 0;
  /// Partial assignment scenario -> {0, 1}.
  std::map<int, int> fixed;
  /// Relaxation value of the parent until the node is solved, then its own.
  double bound = 0.0;
};

struct BnbNodeRecord {
  int id = 0;
  int parent = -1;
  int depth = 0;
  double parent_bound = 0.0;
  /// Relaxation value; NaN when the node was not solved.
  double bound = 0.0;
  /// "branched", "integral", "pruned-bound", "pruned-knapsack", "infeasible".
  std::string outcome;
};

struct BnbResult {
  RunStatus status = RunStatus::NotConverged;
  bool has_incumbent = false;
  double value = 0.0;
  double lower = 0.0;
  SymMatrix x = SymMatrix::zero(1);
  std::vector<int> delta;
  double eta = 0.0;
  std::vector<double> scenario_costs;
  double big_M = 0.0;
  /// Relaxations solved.
  int nodes = 0;
  /// Subtrees cut by the knapsack row: nodes short of mass alpha, plus every
  /// delta_i forced to 1 because the other open scenarios cannot reach alpha.
  int knapsack_pruned = 0;
  std::vector<BnbNodeRecord> log;
};

/// Best-bound-first branch and bound on the VaR form: (1 + rho) c.x + E[q.y] +
/// rho * eta with binary delta. Branches on the most fractional delta (lowest
/// index on ties); ties in the queue go to the deeper node.
BnbResult bnb_solve_var(const ProblemData& p, const ScenarioSet& scen, double alpha, double rho,
                        const BnbOptions& opts = {});

enum class Method { Extensive, Benders, Bnb };

std::string to_string(Method m);
/// "extensive", "benders" or "bnb"; std::invalid_argument otherwise.
Method parse_method(const std::string& s);

struct ModelOptions {
  int threads = 1;
  SolverOptions sdp = recourse_solver_options();
  BendersOptions benders;
  BnbOptions bnb;
};

/// Common result of every method.
struct ModelResult {
  Method method = Method::Extensive;
  /// "Optimal", "NearOptimal", "NotConverged", or a solver status.
  std::string status;
  bool ok = false;
  double value = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  SymMatrix x = SymMatrix::zero(1);
  std::vector<double> scenario_costs;
  std::vector<double> eta;
  std::vector<int> delta;
  int iterations = 0;
  int nodes = 0;
  std::vector<Cut> cuts;
};

/// Whether `m` can solve `spec`: B&B exactly for MeanRisk(VaR); Benders for
/// Expectation, MeanRisk(EE) and MeanRisk(CVaR); the extensive form for every
/// spec with a binary-free form.
bool method_supports(Method m, const RiskSpec& spec);

/// Dispatches to solve_extensive, benders_solve or bnb_solve_var. Throws
/// std::invalid_argument when the method does not support the spec.
ModelResult solve_model(const ProblemData& p, const ScenarioSet& scen, const RiskSpec& spec, Method m,
                        const ModelOptions& opts = {});

}  // namespace stosdp
