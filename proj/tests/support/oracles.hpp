#pragma once

#include <stosdp/recourse.hpp>
#include <stosdp/risk.hpp>

#include <functional>
#include <random>
#include <vector>

namespace stosdp::testing {

/// Minimizer of a unimodal f on [lo, hi] by golden-section search.
double golden_min(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-13);

/// Minimum of a convex f on [lo, hi]: a grid scan of `points` values, then
/// golden-section refinement around the best grid point.
double scan_min(const std::function<double(double)>& f, double lo, double hi, int points = 2001);

/// inf{t : P(Y <= t) >= alpha}, scanning every atom value as a candidate.
double brute_var(const DiscreteDist& d, double alpha);

/// min over eta of eta + E[max(Y - eta, 0)] / (1 - alpha), by scan and refinement.
double scan_cvar(const DiscreteDist& d, double alpha);

/// Random distribution with `atoms` atoms, probabilities from a Dirichlet(1)
/// draw (renormalized exactly), values ~ N(0, scale^2).
DiscreteDist random_dist(std::mt19937_64& rng, int atoms, double scale = 1.0);

/// Law of the total cost c.x + phi(z_i - T.x) under the scenario weights.
DiscreteDist cost_distribution(const RecourseOracle& o, const ScenarioSet& scen, const SymMatrix& x);

/// R(c.x + phi(Z - T.x)) evaluated scenario by scenario through the dual recourse value.
double mean_risk_objective(const RecourseOracle& o, const ScenarioSet& scen, const RiskSpec& spec, const SymMatrix& x);

/// Minimum of a convex function of x along the segment x(t) = a + t (b - a),
/// t in [0, 1], by a grid of `points` values refined with golden section.
double segment_min(const std::function<double(const SymMatrix&)>& f, const SymMatrix& a, const SymMatrix& b,
                   int points = 201);

/// Optimal value of the VaR model (1 + rho) c.x + E[q.y] + rho * eta by
/// enumerating every indicator pattern of mass >= alpha; each pattern is the
/// plain SDP with rows q.y_i <= eta on the selected scenarios.
struct VarBruteForce {
  double value = 0.0;
  std::vector<int> pattern;
  SymMatrix x = SymMatrix::zero(1);
  double eta = 0.0;
  std::vector<double> second_stage;
};
VarBruteForce brute_force_var(const ProblemData& p, const ScenarioSet& scen, double alpha, double rho);

}  // namespace stosdp::testing
