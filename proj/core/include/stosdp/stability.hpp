#pragma once

#include "stosdp/decompose.hpp"
#include "stosdp/problem.hpp"
#include "stosdp/risk.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace stosdp {

enum class PerturbationMode {
  /// pi' = (1 - eps) pi + eps w with w ~ Dirichlet(1): total variation <= eps.
  WeightJitter,
  /// z_i' = z_i + eps g_i / max(1, |g_i|), g_i ~ N(0, I): every atom moves by <= eps.
  SupportJitter,
  /// One atom, picked at random, is split into two halves at z_i +- eps d with |d| = 1.
  MergeSplit,
};

/// "weight-dirichlet-jitter", "support-gaussian-jitter", "atom-merge-split".
std::string to_string(PerturbationMode m);
PerturbationMode parse_perturbation_mode(const std::string& s);

struct PerturbationPlan {
  PerturbationMode mode = PerturbationMode::SupportJitter;
  /// Ascending, nonnegative.
  std::vector<double> magnitudes;
  int replications = 1;
  std::uint64_t seed = 0;

  /// std::invalid_argument unless magnitudes are finite, >= 0 and ascending and replications >= 1.
  void validate() const;
};

/// Perturbed copy of `scen`; eps = 0 returns `scen` unchanged.
ScenarioSet perturb(const ScenarioSet& scen, PerturbationMode mode, double eps, std::uint64_t seed);

struct StabilityCell {
  double epsilon = 0.0;
  int rep = 0;
  /// Solver status, or "Error" when the solve threw.
  std::string status;
  bool ok = false;
  double value = 0.0;
  double value_dist = 0.0;
  double x_dist = 0.0;
  std::string message;
};

struct StabilitySummary {
  double epsilon = 0.0;
  double max_value_dist = 0.0;
  double max_x_dist = 0.0;
  /// kappa * L_hat * eps, where kappa is the sup-norm Lipschitz constant of the
  /// risk measure; only for support-moving modes and measures where it is known.
  std::optional<double> bound;
  int failures = 0;
};

struct StabilityReport {
  PerturbationMode mode = PerturbationMode::SupportJitter;
  double base_value = 0.0;
  SymMatrix base_x = SymMatrix::zero(1);
  /// Ordered by magnitude, then replication.
  std::vector<StabilityCell> cells;
  std::vector<StabilitySummary> summary;
  /// Bound violations and failed cells. Informational only.
  std::vector<std::string> warnings;

  /// Header mode,epsilon,rep,value,value_dist,x_dist,status; numbers at 17 digits.
  std::string to_csv() const;
};

struct StabilityOptions {
  /// Concurrent cell solves; the report does not depend on it.
  int threads = 1;
  /// Defaults to bnb for VaR specs and the extensive form otherwise.
  std::optional<Method> method;
  ModelOptions model;
};

/// Solves the base model, then every (magnitude, replication) cell of the plan.
/// Throws when the base model fails; cell failures are recorded.
StabilityReport stability_sweep(const ProblemData& p, const ScenarioSet& scen, const RiskSpec& spec,
                                const PerturbationPlan& plan, const StabilityOptions& opts = {});

}  // namespace stosdp
