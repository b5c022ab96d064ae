#pragma once

#include "stosdp/block_sdp.hpp"
#include "stosdp/problem.hpp"
#include "stosdp/risk.hpp"

#include <compare>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace stosdp {

/// Role of a variable in a deterministic-equivalent SDP.
enum class Role {
  X,          ///< first-stage block
  Y,          ///< second-stage block of scenario `index`
  V,          ///< excess/deviation scalar; `index` = term * S + scenario (term 0 unless a CVaR mixture)
  Eta,        ///< threshold; `index` = CVaR-mixture term (0 otherwise)
  W,          ///< epigraph of the semideviation norm
  Delta,      ///< VaR indicator of scenario `index`
  DeltaSlack, ///< 1 - delta of scenario `index`
  Arrow,      ///< arrow block of the p = 2 semideviation
  Slack,      ///< inequality slack number `index`
};

std::string to_string(Role r);

struct VarKey {
  Role role = Role::X;
  int index = 0;
  auto operator<=>(const VarKey&) const = default;
};

enum class ModelKind { RiskNeutral, ExpectedExcess, CVaR, VaR, Mad };

/// Deterministic equivalent of a mean-risk model.
struct ExtensiveForm {
  ExtensiveForm(ProblemData p, ScenarioSet scen, RiskSpec spec, ModelKind kind)
      : kind(kind), problem(std::move(p)), scenarios(std::move(scen)), spec(std::move(spec)) {}

  ModelKind kind = ModelKind::RiskNeutral;
  BlockSdp sdp;
  /// Nonnegative-scalar indices restricted to {0, 1} (VaR model only).
  std::vector<int> binary_indices;
  std::map<VarKey, VarLocation> var_map;
  std::optional<double> big_M;
  /// Data the form was built from, kept for extraction.
  ProblemData problem;
  ScenarioSet scenarios;
  RiskSpec spec;
  bool literal = false;
  /// Model parameters: EE threshold, alpha per CVaR term, VaR level, semideviation order, rho.
  double ee_eta = 0.0;
  std::vector<double> term_alpha;
  double var_alpha = 0.0;
  int mad_order = 1;
  double rho = 0.0;

  PsdBlockId x_block() const;
  PsdBlockId y_block(int scenario) const;
  std::optional<VarLocation> find(Role r, int index = 0) const;
  /// Row of each Slack variable, by slack number.
  std::vector<int> slack_rows;
};

struct BuildOptions {
  /// Reproduce the printed VaR big-M row and the printed semideviation row
  /// (with c.x) instead of the definition-consistent encodings.
  bool literal = false;
  /// VaR only: use this constant instead of compute_big_M.
  std::optional<double> big_M;
};

ExtensiveForm build_risk_neutral(const ProblemData& p, const ScenarioSet& scen);
/// E + rho * EE_eta.
ExtensiveForm build_ee(const ProblemData& p, const ScenarioSet& scen, double eta, double rho);
/// E + rho * CVaR_alpha.
ExtensiveForm build_cvar(const ProblemData& p, const ScenarioSet& scen, double alpha, double rho);
/// The mixture sum_j w_j CVaR_{alpha_j} (alpha_j = 0: expectation) alone, or
/// E + rho * mixture when rho is given.
ExtensiveForm build_cvar_mixture(const ProblemData& p, const ScenarioSet& scen, const CVaRMixture& mix,
                                 std::optional<double> rho = std::nullopt);
/// (1 + rho) c.x + E[q.y] + rho * eta with indicators delta_i (binary) selecting
/// scenarios of total mass >= alpha whose second-stage cost is at most eta.
ExtensiveForm build_var(const ProblemData& p, const ScenarioSet& scen, double alpha, double rho,
                        const BuildOptions& opts = {});
/// E + rho * (upper semideviation of order pp). Equals the risk value for rho <= 1,
/// where E + rho * Mad is monotone; a lower bound for larger rho.
ExtensiveForm build_mad(const ProblemData& p, const ScenarioSet& scen, int pp, double rho, const BuildOptions& opts = {});

/// Dispatches on the spec: Expectation, CVaR, CVaRMixture and MeanRisk over
/// ExpectedExcess, CVaR, VaR, UpperSemidev or CVaRMixture.
ExtensiveForm build_model(const ProblemData& p, const ScenarioSet& scen, const RiskSpec& spec,
                          const BuildOptions& opts = {});

struct ScenarioBounds {
  double lower = 0.0;  ///< min q.y_i over the coupled feasible set
  double upper = 0.0;  ///< L * (|z_i| + |T| R_X) >= max over X of phi(z_i - T.x)
};

struct BigMReport {
  double M = 0.0;
  double eta_upper = 0.0;
  std::vector<ScenarioBounds> per_scenario;
  std::vector<std::string> trace;
};

/// Requires a compact X and verified A1/A2 (PreconditionError otherwise).
BigMReport compute_big_M(const ProblemData& p, const ScenarioSet& scen);

/// Fills a point of `ef` from x and the second-stage blocks, choosing every
/// auxiliary variable optimally (thresholds at the quantile, excesses at their
/// positive parts, slacks from the rows). For VaR forms delta follows the
/// quantile; `delta` overrides it.
SdpPoint assemble_point(const ExtensiveForm& ef, const SymMatrix& x, const std::vector<SymMatrix>& y,
                        const std::optional<std::vector<int>>& delta = std::nullopt);

struct ExtensiveSolution {
  SolveStatus status = SolveStatus::NumericalFailure;
  double value = 0.0;
  SymMatrix x = SymMatrix::zero(1);
  std::vector<SymMatrix> y;
  /// q.y_i per scenario.
  std::vector<double> scenario_costs;
  std::vector<double> eta;
  std::vector<double> delta;
  SdpSolution raw;
};

/// Extracts the named variables from a solution of ef.sdp.
ExtensiveSolution extract(const ExtensiveForm& ef, const SdpSolution& sol);

/// Solves a form without binaries (PreconditionError otherwise).
ExtensiveSolution solve_extensive(const ExtensiveForm& ef, const SolverOptions& opts = {});

}  // namespace stosdp
