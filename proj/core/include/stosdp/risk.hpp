#pragma once

#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace stosdp {

struct Atom {
  double prob = 0.0;
  double value = 0.0;
};

/// Finite discrete law of a scalar cost: positive probabilities summing to 1.
class DiscreteDist {
 public:
  static constexpr double kSumTol = 1e-12;

  /// Throws std::invalid_argument on empty input, non-positive or non-finite
  /// probabilities, non-finite values, or a total off by more than kSumTol.
  explicit DiscreteDist(std::vector<Atom> atoms);
  static DiscreteDist point_mass(double value) { return DiscreteDist({{1.0, value}}); }

  int size() const { return static_cast<int>(atoms_.size()); }
  const Atom& operator[](int i) const { return atoms_[static_cast<std::size_t>(i)]; }
  const std::vector<Atom>& atoms() const { return atoms_; }

  /// Law of Y + c and of lambda * Y.
  DiscreteDist shifted(double c) const;
  DiscreteDist scaled(double lambda) const;

 private:
  std::vector<Atom> atoms_;
};

double expectation(const DiscreteDist& d);
/// E[max(Y - eta, 0)].
double expected_excess(const DiscreteDist& d, double eta);

struct CvarValue {
  double value = 0.0;
  /// A minimizer of eta + E[max(Y - eta, 0)] / (1 - alpha): the alpha-quantile.
  double eta = 0.0;
};

/// Sorted-atom closed form (fractional tail at the quantile). alpha in (0, 1).
CvarValue cvar(const DiscreteDist& d, double alpha);
/// eta + E[max(Y - eta, 0)] / (1 - alpha), whose minimum over eta is CVaR_alpha.
double cvar_objective(const DiscreteDist& d, double alpha, double eta);
/// Smallest atom value whose cumulative probability reaches alpha. alpha in (0, 1).
double value_at_risk(const DiscreteDist& d, double alpha);
/// (E[max(Y - E Y, 0)^p])^(1/p), p in {1, 2}.
double upper_semidev(const DiscreteDist& d, int p);

struct Expectation {};
struct ExpectedExcess {
  double eta = 0.0;
};
struct CVaR {
  double alpha = 0.5;
};
struct VaR {
  double alpha = 0.5;
};
struct UpperSemidev {
  int p = 1;
};
/// sum_j weight_j * CVaR_{alpha_j}, alpha_j = 0 meaning the expectation.
struct CVaRMixture {
  std::vector<std::pair<double, double>> terms;  // (weight, alpha)
};

using BaseRisk = std::variant<ExpectedExcess, CVaR, VaR, UpperSemidev, CVaRMixture>;

/// E[Y] + rho * base(Y).
struct MeanRisk {
  BaseRisk base;
  double rho = 0.0;
};

using RiskSpec = std::variant<Expectation, ExpectedExcess, CVaR, VaR, UpperSemidev, MeanRisk, CVaRMixture>;

inline RiskSpec mean_upper_semidev(int p, double rho) { return MeanRisk{UpperSemidev{p}, rho}; }

/// Throws std::invalid_argument describing the first invalid parameter.
void validate(const RiskSpec& spec);
double evaluate(const RiskSpec& spec, const DiscreteDist& d);

/// Weights w >= 0 with sum_i w_i * (v'_i - v_i) <= R(v') - R(v) for every cost
/// vector v' (a subgradient of v -> R(v) at the atom values). Defined for the
/// convex measures: Expectation, ExpectedExcess, CVaR, CVaRMixture and MeanRisk
/// over one of them. Throws std::invalid_argument for VaR and UpperSemidev.
std::vector<double> risk_gradient_weights(const RiskSpec& spec, const DiscreteDist& d);

/// Parses "E", "E+rho*EE(eta)", "E+rho*CVaR(alpha)", "E+rho*VaR(alpha)" and
/// "E+rho*Mad(p)". Whitespace is ignored. Throws std::invalid_argument.
RiskSpec parse_risk_spec(const std::string& text);
/// Inverse of parse_risk_spec for the forms it accepts; a readable label otherwise.
std::string to_string(const RiskSpec& spec);

}  // namespace stosdp
