#include <doctest.h>

#include <stosdp/errors.hpp>
#include <stosdp/extensive.hpp>

#include "support/instances.hpp"
#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace stosdp;
using namespace stosdp::testing;

namespace {

int count_rows_with_psd_block(const BlockSdp& sdp, int block) {
  int n = 0;
  for (const auto& r : sdp.rows()) {
    for (const auto& [b, a] : r.psd) {
      if (b == block) {
        ++n;
        break;
      }
    }
  }
  return n;
}

// Direct model min c.x + q.y s.t. T.x + W.y = z, x in X, y psd.
double deterministic_value(const ProblemData& p, const Vector& z) {
  BlockSdp sdp;
  const auto x = sdp.add_psd_block(p.n);
  const auto y = sdp.add_psd_block(p.m);
  sdp.add_cost(x, p.c);
  sdp.add_cost(y, p.q);
  for (int j = 0; j < p.s; ++j) {
    const int r = sdp.add_row(z(j));
    sdp.add_term(r, x, p.T[j]);
    sdp.add_term(r, y, p.W[j]);
  }
  if (p.X.trace_cap) {
    const int r = sdp.add_row(*p.X.trace_cap);
    sdp.add_term(r, x, SymMatrix::identity(p.n));
    sdp.add_term(r, sdp.add_nonneg(), 1.0);
  }
  const auto sol = solve(sdp);
  REQUIRE(sol.optimal());
  return sol.pobj;
}

const SolverOptions kTight = recourse_solver_options();

}  // namespace

TEST_CASE("risk-neutral form") {
  const ProblemData d = diag_instance(0.3, 1.0, 2.0);

  SUBCASE("a single scenario is the deterministic problem") {
    const auto scen = make_scenarios({{1.0, {0.7}}});
    const auto sol = solve_extensive(build_risk_neutral(d, scen), kTight);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.value == doctest::Approx(deterministic_value(d, scen[0].z)).epsilon(1e-8));
  }

  SUBCASE("shape") {
    std::mt19937_64 rng(4);
    const ProblemData p = random_a1a2(rng, 2, 2, 1);
    const auto scen = random_scenarios(rng, 3, 1);
    const auto ef = build_risk_neutral(p, scen);
    CHECK(ef.sdp.psd_dims() == std::vector<int>{2, 2, 2, 2});
    CHECK(ef.sdp.num_free() == 0);
    CHECK(ef.binary_indices.empty());
    // Three coupling rows plus the trace row.
    CHECK(ef.sdp.num_rows() == 3 + 1);
    CHECK(ef.sdp.num_nonneg() == 1);
    for (int i = 0; i < 3; ++i) CHECK(count_rows_with_psd_block(ef.sdp, ef.y_block(i).index) == 1);
  }

  SUBCASE("X = {0} leaves sum pi_i |z_i|") {
    const auto scen = make_scenarios({{0.2, {1.5}}, {0.5, {-0.5}}, {0.3, {2.0}}});
    const auto sol = solve_extensive(build_risk_neutral(diag_instance(0.0, 0.0, 0.0), scen), kTight);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.value == doctest::Approx(0.2 * 1.5 + 0.5 * 0.5 + 0.3 * 2.0).epsilon(1e-8));
  }

  SUBCASE("two-scenario value equals c.x* + sum pi_i phi(z_i - T.x*)") {
    const auto scen = make_scenarios({{0.4, {1.5}}, {0.6, {0.25}}});
    const ProblemData p = diag_instance(-0.2, 1.0, 2.0);
    const auto sol = solve_extensive(build_risk_neutral(p, scen), kTight);
    REQUIRE(sol.status == SolveStatus::Optimal);
    const double x = sol.x(0, 0);
    CHECK(p.X.contains(sol.x, 1e-8));
    const double direct = -0.2 * x + 0.4 * std::abs(1.5 - x) + 0.6 * std::abs(0.25 - x);
    CHECK(sol.value == doctest::Approx(direct).epsilon(1e-6));
    for (int i = 0; i < 2; ++i) CHECK(sol.scenario_costs[static_cast<std::size_t>(i)] == doctest::Approx(std::abs(scen[i].z(0) - x)).epsilon(1e-6));
  }

  SUBCASE("contradictory X is infeasible") {
    ProblemData p = d;
    p.X.equalities.push_back({SymMatrix::identity(1), 0.5});
    p.X.equalities.push_back({SymMatrix::identity(1), 0.7});
    const auto sol = solve_extensive(build_risk_neutral(p, make_scenarios({{1.0, {1.0}}})));
    CHECK(sol.status == SolveStatus::PrimalInfeasible);
  }
}

TEST_CASE("expected-excess form") {
  const ProblemData p = diag_instance(0.3, 1.0, 2.0);
  const auto scen = make_scenarios({{0.3, {1.5}}, {0.7, {-0.5}}});
  const double rn = solve_extensive(build_risk_neutral(p, scen), kTight).value;
  CHECK(solve_extensive(build_ee(p, scen, 0.5, 0.0), kTight).value == doctest::Approx(rn).epsilon(1e-8));

  SUBCASE("eta below every cost turns EE into E - eta") {
    // Costs are at least 0, so with eta = -1 the excess is E + 1 and x* is unchanged.
    const double rho = 0.7;
    const auto sol = solve_extensive(build_ee(p, scen, -1.0, rho), kTight);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.value == doctest::Approx((1 + rho) * rn + rho * 1.0).epsilon(1e-8));
  }

  SUBCASE("value equals the risk evaluation at x*") {
    const RecourseOracle o(p);
    for (double eta : {0.2, 0.6, 1.0}) {
      const RiskSpec spec = MeanRisk{ExpectedExcess{eta}, 1.5};
      const auto sol = solve_extensive(build_ee(p, scen, eta, 1.5), kTight);
      REQUIRE(sol.status == SolveStatus::Optimal);
      CHECK(sol.value == doctest::Approx(mean_risk_objective(o, scen, spec, sol.x)).epsilon(1e-6));
    }
  }
}

TEST_CASE("CVaR form") {
  const ProblemData p = diag_instance(0.3, 1.0, 2.0);
  const auto scen = make_scenarios({{0.3, {1.5}}, {0.7, {-0.5}}});
  const double rn = solve_extensive(build_risk_neutral(p, scen), kTight).value;
  CHECK(solve_extensive(build_cvar(p, scen, 0.5, 0.0), kTight).value == doctest::Approx(rn).epsilon(1e-8));

  SUBCASE("single scenario") {
    const auto one = make_scenarios({{1.0, {0.8}}});
    const double det = deterministic_value(p, one[0].z);
    for (double rho : {0.5, 1.0, 3.0}) {
      CHECK(solve_extensive(build_cvar(p, one, 0.3, rho), kTight).value == doctest::Approx((1 + rho) * det).epsilon(1e-7));
    }
  }

  SUBCASE("eta* is the quantile of the induced cost law") {
    const RecourseOracle o(p);
    const auto sol = solve_extensive(build_cvar(p, scen, 0.5, 1.0), kTight);
    REQUIRE(sol.status == SolveStatus::Optimal);
    REQUIRE(sol.eta.size() == 1);
    const auto law = cost_distribution(o, scen, sol.x);
    CHECK(std::abs(sol.eta[0] - cvar(law, 0.5).eta) <= 1e-6);
    CHECK(sol.value == doctest::Approx(expectation(law) + cvar(law, 0.5).value).epsilon(1e-6));
  }
}

TEST_CASE("VaR form") {
  const ProblemData p = diag_instance(0.3, 1.0, 2.0);
  const auto scen = make_scenarios({{0.3, {1.5}}, {0.2, {-0.5}}, {0.5, {1.0}}});
  const auto ef = build_var(p, scen, 0.6, 1.0);
  CHECK(ef.binary_indices.size() == 3);
  REQUIRE(ef.big_M.has_value());
  CHECK(*ef.big_M > 0.0);
  CHECK(ef.sdp.num_free() == 1);
  CHECK_THROWS_AS(solve_extensive(ef), PreconditionError);

  ProblemData open = p;
  open.X = Spectrahedron::psd_cone(1);
  CHECK_THROWS_AS(build_var(open, scen, 0.6, 1.0), PreconditionError);

  SUBCASE("assembled patterns reproduce the printed objective") {
    std::mt19937_64 rng(12);
    const RecourseOracle o(p);
    for (int k = 0; k < 5; ++k) {
      const SymMatrix x = SymMatrix::from_rows({{2.0 * std::uniform_real_distribution<double>(0, 1)(rng)}});
      std::vector<SymMatrix> y;
      std::vector<Atom> second;
      for (int i = 0; i < 3; ++i) {
        const double t = scen[i].z(0) - x(0, 0);
        y.push_back(SymMatrix::from_rows({{std::max(t, 0.0), 0}, {0, std::max(-t, 0.0)}}));
        second.push_back({scen[i].prob, std::abs(t)});
      }
      const SdpPoint pt = assemble_point(ef, x, y);
      const double expect = 2.0 * 0.3 * x(0, 0) + expectation(DiscreteDist(second)) + value_at_risk(DiscreteDist(second), 0.6);
      CHECK(ef.sdp.objective(pt) == doctest::Approx(expect).epsilon(1e-12));
      CHECK((ef.sdp.apply(pt) - ef.sdp.rhs()).norm() <= 1e-12);
      for (Eigen::Index j = 0; j < pt.nonneg.size(); ++j) CHECK(pt.nonneg(j) >= -1e-12);
    }
  }
}

TEST_CASE("semideviation form") {
  const ProblemData p = diag_instance(0.3, 1.0, 2.0);

  SUBCASE("identical scenarios have no deviation") {
    const auto same = make_scenarios({{0.4, {0.8}}, {0.6, {0.8}}});
    const double rn = solve_extensive(build_risk_neutral(p, same), kTight).value;
    for (int pp : {1, 2}) CHECK(solve_extensive(build_mad(p, same, pp, 0.8), kTight).value == doctest::Approx(rn).epsilon(1e-7));
  }

  SUBCASE("value equals the risk evaluation at x*") {
    const RecourseOracle o(p);
    const auto scen = make_scenarios({{0.3, {1.5}}, {0.7, {-0.5}}});
    for (int pp : {1, 2}) {
      const auto sol = solve_extensive(build_mad(p, scen, pp, 0.6), kTight);
      REQUIRE(sol.status == SolveStatus::Optimal);
      CHECK(sol.value == doctest::Approx(mean_risk_objective(o, scen, mean_upper_semidev(pp, 0.6), sol.x)).epsilon(1e-6));
    }
  }

  SUBCASE("arrow block") {
    const auto scen = make_scenarios({{0.25, {1.0}}, {0.25, {2.0}}, {0.5, {-1.0}}});
    const auto ef = build_mad(p, scen, 2, 0.5);
    const auto& dims = ef.sdp.psd_dims();
    CHECK(std::count(dims.begin(), dims.end(), 4) == 1);
    CHECK(ef.find(Role::W).has_value());
    CHECK(build_mad(p, scen, 1, 0.5).sdp.num_psd_blocks() == 4);
    CHECK_THROWS_AS(build_mad(p, scen, 3, 0.5), std::invalid_argument);
  }

  SUBCASE("literal row keeps c.x") {
    const auto scen = make_scenarios({{0.5, {1.0}}, {0.5, {-1.0}}});
    const auto lit = build_mad(p, scen, 1, 0.5, BuildOptions{true, std::nullopt});
    CHECK(lit.literal);
    int with_x = 0;
    for (int i = 0; i < 2; ++i) {
      const int r = lit.slack_rows[static_cast<std::size_t>(i) + 1];
      for (const auto& [b, a] : lit.sdp.row(r).psd) with_x += b == lit.x_block().index;
    }
    CHECK(with_x == 2);
  }
}

TEST_CASE("big-M") {
  SUBCASE("diag instance with T = 0") {
    const auto scen = make_scenarios({{0.5, {1.0}}, {0.5, {-1.0}}});
    const auto rep = compute_big_M(diag_instance(0.0, 0.0, 1.0), scen);
    CHECK(rep.eta_upper == doctest::Approx(1.0).epsilon(1e-7));
    REQUIRE(rep.per_scenario.size() == 2);
    for (const auto& b : rep.per_scenario) CHECK(b.lower == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(rep.M == doctest::Approx(1.0).epsilon(1e-6));
    CHECK_FALSE(rep.trace.empty());
  }

  SUBCASE("zero right-hand sides") {
    const auto rep = compute_big_M(diag_instance(0.0, 0.0, 1.0), make_scenarios({{0.5, {0.0}}, {0.5, {0.0}}}));
    CHECK(rep.M == doctest::Approx(1.0).epsilon(1e-7));
  }

  SUBCASE("doubling z at least doubles the z part of the bound") {
    const ProblemData p = diag_instance(0.1, 1.0, 1.0);
    const auto a = compute_big_M(p, make_scenarios({{0.5, {1.0}}, {0.5, {-2.0}}}));
    const auto b = compute_big_M(p, make_scenarios({{0.5, {2.0}}, {0.5, {-4.0}}}));
    const double tx = 1.0;  // L |T| R_X
    CHECK(b.eta_upper - tx >= 2.0 * (a.eta_upper - tx) - 1e-9);
  }

  SUBCASE("preconditions") {
    ProblemData open = diag_instance();
    open.X = Spectrahedron::psd_cone(1);
    CHECK_THROWS_AS(compute_big_M(open, make_scenarios({{1.0, {1.0}}})), PreconditionError);
    CHECK_THROWS_AS(compute_big_M(nonattain_instance(), make_scenarios({{1.0, {1.0}}})), PreconditionError);
  }
}

TEST_CASE("build_model dispatch") {
  const ProblemData p = diag_instance(0.3, 1.0, 2.0);
  const auto scen = make_scenarios({{0.3, {1.5}}, {0.7, {-0.5}}});
  CHECK(build_model(p, scen, Expectation{}).kind == ModelKind::RiskNeutral);
  CHECK(build_model(p, scen, parse_risk_spec("E+1*EE(0.5)")).kind == ModelKind::ExpectedExcess);
  CHECK(build_model(p, scen, parse_risk_spec("E+1*CVaR(0.5)")).kind == ModelKind::CVaR);
  CHECK(build_model(p, scen, parse_risk_spec("E+1*VaR(0.5)")).kind == ModelKind::VaR);
  CHECK(build_model(p, scen, parse_risk_spec("E+1*Mad(2)")).kind == ModelKind::Mad);
  CHECK_THROWS_AS(build_model(p, scen, VaR{0.5}), std::invalid_argument);
  CHECK_THROWS_AS(build_model(p, scen, UpperSemidev{1}), std::invalid_argument);

  const RecourseOracle o(p);
  const CVaRMixture mix{{{0.25, 0.0}, {0.5, 0.4}, {0.25, 0.8}}};
  for (const RiskSpec& spec : {RiskSpec{mix}, RiskSpec{CVaR{0.6}}, RiskSpec{MeanRisk{mix, 0.5}}}) {
    const auto sol = solve_extensive(build_model(p, scen, spec), kTight);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.value == doctest::Approx(mean_risk_objective(o, scen, spec, sol.x)).epsilon(1e-6));
  }
}

TEST_CASE("objective consistency on assembled points") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 0; k < 8; ++k) {
    const ProblemData p = random_a1a2(rng, 2, 2, 2);
    const auto scen = random_scenarios(rng, 3, 2);
    const std::vector<RiskSpec> specs = {Expectation{},
                                         MeanRisk{ExpectedExcess{unit(rng)}, 2 * unit(rng)},
                                         MeanRisk{CVaR{0.1 + 0.8 * unit(rng)}, 2 * unit(rng)},
                                         MeanRisk{VaR{0.1 + 0.8 * unit(rng)}, 2 * unit(rng)},
                                         mean_upper_semidev(1, unit(rng)),
                                         mean_upper_semidev(2, unit(rng)),
                                         CVaRMixture{{{0.5, 0.0}, {0.5, 0.5}}}};
    // Any PSD blocks: the identity ignores feasibility.
    const SymMatrix x = random_pd(rng, 2, 0.0);
    std::vector<SymMatrix> y;
    std::vector<Atom> atoms;
    for (int i = 0; i < 3; ++i) {
      y.push_back(random_pd(rng, 2, 0.0));
      atoms.push_back({scen[i].prob, p.c.dot(x) + p.q.dot(y.back())});
    }
    const DiscreteDist law(atoms);
    for (const auto& spec : specs) {
      CAPTURE(to_string(spec));
      const auto ef = build_model(p, scen, spec, BuildOptions{false, 50.0});
      const SdpPoint pt = assemble_point(ef, x, y);
      CHECK(std::abs(ef.sdp.objective(pt) - evaluate(spec, law)) <= 1e-9 * (1 + std::abs(evaluate(spec, law))));
    }
  }
}

TEST_CASE("optimal values grow with rho") {
  std::mt19937_64 rng(15);
  const ProblemData p = random_a1a2(rng, 2, 2, 1);
  const auto scen = random_scenarios(rng, 4, 1, 1.5);
  double prev_ee = -1e300, prev_cvar = -1e300, prev_mad = -1e300;
  for (double rho : {0.0, 0.5, 1.0, 2.0}) {
    const double ee = solve_extensive(build_ee(p, scen, 0.0, rho), kTight).value;
    const double cv = solve_extensive(build_cvar(p, scen, 0.7, rho), kTight).value;
    const double md = solve_extensive(build_mad(p, scen, 1, rho), kTight).value;
    CHECK(ee >= prev_ee - 1e-8);
    CHECK(cv >= prev_cvar - 1e-8);
    CHECK(md >= prev_mad - 1e-8);
    prev_ee = ee;
    prev_cvar = cv;
    prev_mad = md;
  }
}

TEST_CASE("extensive value equals a line-search oracle over X") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 0; k < 4; ++k) {
    const int n = 1 + k % 2;
    ProblemData p = scaled_identity_slice(random_a1a2(rng, n, 2, 1 + k % 2, 2.0));
    const auto scen = random_scenarios(rng, 2 + k % 3, p.s, 1.5);
    const RecourseOracle o(p);
    const std::vector<RiskSpec> specs = {Expectation{}, MeanRisk{ExpectedExcess{unit(rng)}, unit(rng) * 2},
                                         MeanRisk{CVaR{0.2 + 0.6 * unit(rng)}, unit(rng) * 2},
                                         mean_upper_semidev(1, unit(rng)), mean_upper_semidev(2, unit(rng))};
    const SymMatrix lo = SymMatrix::zero(n);
    const SymMatrix hi = (2.0 / n) * SymMatrix::identity(n);
    for (const auto& spec : specs) {
      CAPTURE(to_string(spec));
      const auto sol = solve_extensive(build_model(p, scen, spec), kTight);
      REQUIRE(sol.raw.usable());
      const double oracle = segment_min([&](const SymMatrix& x) { return mean_risk_objective(o, scen, spec, x); }, lo, hi);
      CHECK(std::abs(sol.value - oracle) <= 2e-4);
    }
  }
}

TEST_CASE("Q_R is convex along segments and Lipschitz") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 0; k < 3; ++k) {
    const ProblemData p = random_a1a2(rng, 2, 2, 2, 2.0);
    const auto scen = random_scenarios(rng, 3, 2);
    const RecourseOracle o(p);
    const double lip = p.c.norm() + o.lipschitz_bound() * p.T.norm();
    const std::vector<RiskSpec> convex = {Expectation{}, MeanRisk{ExpectedExcess{0.3}, 1.0}, MeanRisk{CVaR{0.6}, 1.0},
                                          mean_upper_semidev(1, 0.5), mean_upper_semidev(2, 1.0)};
    const std::vector<RiskSpec> coherent = {Expectation{}, CVaR{0.7}, CVaRMixture{{{0.3, 0.0}, {0.7, 0.5}}}};
    for (int t = 0; t < 4; ++t) {
      const SymMatrix a = unit(rng) * random_pd(rng, 2, 0.0);
      const SymMatrix b = random_pd(rng, 2, 0.0) * unit(rng);
      const double lam = unit(rng);
      for (const auto& spec : convex) {
        const double fa = mean_risk_objective(o, scen, spec, a);
        const double fb = mean_risk_objective(o, scen, spec, b);
        const double fm = mean_risk_objective(o, scen, spec, lam * a + (1 - lam) * b);
        CHECK(fm <= lam * fa + (1 - lam) * fb + 1e-6);
      }
      for (const auto& spec : coherent) {
        const double fa = mean_risk_objective(o, scen, spec, a);
        const double fb = mean_risk_objective(o, scen, spec, b);
        CHECK(std::abs(fa - fb) <= lip * (a - b).norm() + 1e-6);
      }
    }
  }
}
