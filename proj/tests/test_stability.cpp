#include <doctest.h>

#include <stosdp/recourse.hpp>
#include <stosdp/stability.hpp>

#include "support/instances.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace stosdp;
using namespace stosdp::testing;

namespace {

double total_variation(const ScenarioSet& a, const ScenarioSet& b) {
  double tv = 0.0;
  for (int i = 0; i < a.size(); ++i) tv += std::abs(a[i].prob - b[i].prob);
  return 0.5 * tv;
}

bool same(const ScenarioSet& a, const ScenarioSet& b) {
  if (a.size() != b.size()) return false;
  for (int i = 0; i < a.size(); ++i) {
    if (a[i].prob != b[i].prob || a[i].z != b[i].z) return false;
  }
  return true;
}

PerturbationPlan plan(PerturbationMode mode, std::vector<double> eps, int reps, std::uint64_t seed = 11) {
  PerturbationPlan pl;
  pl.mode = mode;
  pl.magnitudes = std::move(eps);
  pl.replications = reps;
  pl.seed = seed;
  return pl;
}

}  // namespace

TEST_CASE("perturb") {
  std::mt19937_64 rng(2);
  const auto scen = random_scenarios(rng, 4, 2, 1.0);
  const auto modes = {PerturbationMode::WeightJitter, PerturbationMode::SupportJitter, PerturbationMode::MergeSplit};

  SUBCASE("eps = 0 is the identity") {
    for (auto m : modes) CHECK(same(perturb(scen, m, 0.0, 5), scen));
  }

  SUBCASE("weight jitter on two atoms") {
    const auto two = make_scenarios({{0.4, {1.0}}, {0.6, {-1.0}}});
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const auto out = perturb(two, PerturbationMode::WeightJitter, 0.1, seed);
      CHECK(std::abs(out[0].prob - 0.4) <= 0.1);
      CHECK(std::abs(out[0].prob + out[1].prob - 1.0) <= 1e-15);
      CHECK(out[0].z == two[0].z);
    }
  }

  SUBCASE("weight jitter stays within total variation eps") {
    for (double eps : {0.01, 0.2, 1.0, 3.0}) {
      for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto out = perturb(scen, PerturbationMode::WeightJitter, eps, seed);
        CHECK(total_variation(out, scen) <= eps + 1e-12);
        for (const auto& s : out.scenarios) CHECK(s.prob > 0.0);
      }
    }
  }

  SUBCASE("support jitter moves every atom by at most eps") {
    for (double eps : {1e-3, 0.5}) {
      for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto out = perturb(scen, PerturbationMode::SupportJitter, eps, seed);
        for (int i = 0; i < scen.size(); ++i) {
          CHECK((out[i].z - scen[i].z).norm() <= eps * (1 + 1e-12));
          CHECK(out[i].prob == scen[i].prob);
        }
      }
    }
  }

  SUBCASE("merge-split keeps the mean and moves mass by eps") {
    const auto out = perturb(scen, PerturbationMode::MergeSplit, 0.3, 9);
    REQUIRE(out.size() == scen.size() + 1);
    Vector m0 = Vector::Zero(2), m1 = Vector::Zero(2);
    for (const auto& s : scen.scenarios) m0 += s.prob * s.z;
    for (const auto& s : out.scenarios) m1 += s.prob * s.z;
    CHECK((m0 - m1).norm() <= 1e-14);
    CHECK(std::abs(out.total_probability() - 1.0) <= 1e-15);
  }

  SUBCASE("same seed, same output") {
    for (auto m : modes) CHECK(same(perturb(scen, m, 0.1, 77), perturb(scen, m, 0.1, 77)));
    CHECK_FALSE(same(perturb(scen, PerturbationMode::SupportJitter, 0.1, 1),
                     perturb(scen, PerturbationMode::SupportJitter, 0.1, 2)));
  }

  CHECK_THROWS_AS(perturb(scen, PerturbationMode::SupportJitter, -1.0, 0), std::invalid_argument);
}

TEST_CASE("plan validation and mode names") {
  CHECK_THROWS_AS(plan(PerturbationMode::SupportJitter, {0.1, 0.01}, 1).validate(), std::invalid_argument);
  CHECK_THROWS_AS(plan(PerturbationMode::SupportJitter, {}, 1).validate(), std::invalid_argument);
  CHECK_THROWS_AS(plan(PerturbationMode::SupportJitter, {0.1}, 0).validate(), std::invalid_argument);
  for (auto m : {PerturbationMode::WeightJitter, PerturbationMode::SupportJitter, PerturbationMode::MergeSplit}) {
    CHECK(parse_perturbation_mode(to_string(m)) == m);
  }
  CHECK_THROWS_AS(parse_perturbation_mode("shake"), std::invalid_argument);
}

TEST_CASE("sweep with eps = 0 only") {
  const ProblemData p = diag_instance(0.3, 1.0, 2.0);
  const auto scen = make_scenarios({{0.3, {1.5}}, {0.7, {-0.5}}});
  const auto rep = stability_sweep(p, scen, Expectation{}, plan(PerturbationMode::SupportJitter, {0.0}, 3));
  REQUIRE(rep.cells.size() == 3);
  for (const auto& c : rep.cells) {
    CHECK(c.ok);
    CHECK(c.value_dist <= 1e-6);
    CHECK(c.x_dist <= 1e-6);
  }
  CHECK(rep.warnings.empty());
}

TEST_CASE("sweep on the diag instance is bounded by L_hat eps") {
  const ProblemData p = diag_instance(0.3, 1.0, 2.0);
  const auto scen = make_scenarios({{0.3, {1.5}}, {0.2, {-0.5}}, {0.5, {0.8}}});
  CHECK(RecourseOracle(p).lipschitz_bound() == doctest::Approx(1.0).epsilon(1e-9));
  for (const RiskSpec& spec : {RiskSpec{Expectation{}}, RiskSpec{CVaR{0.5}}}) {
    for (auto mode : {PerturbationMode::SupportJitter, PerturbationMode::MergeSplit}) {
      const auto rep = stability_sweep(p, scen, spec, plan(mode, {0.001, 0.01, 0.1}, 4));
      REQUIRE(rep.summary.size() == 3);
      for (const auto& s : rep.summary) {
        CHECK(s.failures == 0);
        REQUIRE(s.bound.has_value());
        CHECK(*s.bound == doctest::Approx(s.epsilon).epsilon(1e-9));
        CHECK(s.max_value_dist <= s.epsilon + 1e-6);
      }
      CHECK(rep.summary[0].max_value_dist <= rep.summary[1].max_value_dist + 1e-6);
      CHECK(rep.summary[1].max_value_dist <= rep.summary[2].max_value_dist + 1e-6);
      CHECK(rep.warnings.empty());
    }
  }
}

TEST_CASE("sweep: weight jitter and risk-averse specs") {
  const ProblemData p = diag_instance(0.3, 1.0, 2.0);
  const auto scen = make_scenarios({{0.3, {1.5}}, {0.2, {-0.5}}, {0.5, {0.8}}});
  const auto rep = stability_sweep(p, scen, parse_risk_spec("E+1*VaR(0.6)"),
                                   plan(PerturbationMode::WeightJitter, {0.0, 0.05}, 2));
  CHECK(rep.cells.size() == 4);
  for (const auto& s : rep.summary) CHECK_FALSE(s.bound.has_value());
  CHECK(rep.cells[0].value_dist <= 1e-6);
}

TEST_CASE("sweep determinism") {
  std::mt19937_64 rng(13);
  const ProblemData p = random_a1a2(rng, 2, 2, 1, 2.0);
  const auto scen = random_scenarios(rng, 3, 1, 1.0);
  const auto pl = plan(PerturbationMode::SupportJitter, {0.0, 0.01, 0.1}, 3, 1234);
  StabilityOptions serial, parallel;
  parallel.threads = 3;
  const std::string a = stability_sweep(p, scen, Expectation{}, pl, serial).to_csv();
  const std::string b = stability_sweep(p, scen, Expectation{}, pl, serial).to_csv();
  const std::string c = stability_sweep(p, scen, Expectation{}, pl, parallel).to_csv();
  CHECK(a == b);
  CHECK(a == c);
  CHECK(a.rfind("mode,epsilon,rep,value,value_dist,x_dist,status\n", 0) == 0);
  CHECK(std::count(a.begin(), a.end(), '\n') == 10);
}

TEST_CASE("value distances vanish as eps goes to zero") {
  const ProblemData p = diag_instance(0.3, 1.0, 2.0);
  const auto scen = make_scenarios({{0.3, {1.5}}, {0.2, {-0.5}}, {0.5, {0.8}}});
  const auto rep = stability_sweep(p, scen, Expectation{}, plan(PerturbationMode::SupportJitter, {1e-9, 1e-3, 1e-1}, 2));
  CHECK(rep.summary.front().max_value_dist <= 10 * SolverOptions{}.gap_tol);
}
