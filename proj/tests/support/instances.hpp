#pragma once

#include <stosdp/problem.hpp>

#include <random>

namespace stosdp::testing {

/// q = I_2, W = (diag(1,-1)), s = 1, so phi(t) = |t|. First stage: n = 1,
/// c = c0, T = (t0), X = {0 <= x <= cap}.
ProblemData diag_instance(double c0 = 0.0, double t0 = 0.0, double cap = 1.0);

/// q = diag(1,0), W = ([[0,.5],[.5,0]]): M_D = {0}, primal optimum not attained for t != 0.
ProblemData nonattain_instance();

/// Random problem with q positive definite (A2) and W annihilating a positive
/// definite Y0 (A1). X is a trace ball of radius cap.
ProblemData random_a1a2(std::mt19937_64& rng, int n, int m, int s, double cap = 2.0);

/// Restricts X to {a I : 0 <= a <= cap / n} by adding equalities, a
/// one-parameter slice of the trace ball.
ProblemData scaled_identity_slice(ProblemData p);

/// Random symmetric matrix with entries ~ N(0, 1).
SymMatrix random_sym(std::mt19937_64& rng, int k);
/// Random positive definite matrix with eigenvalues >= floor.
SymMatrix random_pd(std::mt19937_64& rng, int k, double floor = 0.2);
/// Random point with positive probabilities summing to 1 and z ~ N(0, scale^2).
ScenarioSet random_scenarios(std::mt19937_64& rng, int count, int s, double scale = 1.0);

ScenarioSet make_scenarios(std::initializer_list<std::pair<double, std::initializer_list<double>>> atoms);

}  // namespace stosdp::testing
