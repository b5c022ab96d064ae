#include <doctest.h>

#include <stosdp/block_sdp.hpp>

#include "support/instances.hpp"

#include <cmath>
#include <limits>
#include <random>

using namespace stosdp;
using stosdp::testing::random_pd;
using stosdp::testing::random_sym;

namespace {

// min [1,0;0,0].y  s.t.  [0,.5;.5,0].y = t,  y psd.
BlockSdp nonattain_sdp(double t) {
  BlockSdp sdp;
  const auto y = sdp.add_psd_block(2);
  sdp.add_cost(y, SymMatrix::from_rows({{1, 0}, {0, 0}}));
  const int r = sdp.add_row(t);
  sdp.add_term(r, y, SymMatrix::from_rows({{0, 0.5}, {0.5, 0}}));
  return sdp;
}

// The recourse problem of the diag instance: min I.y  s.t. diag(1,-1).y = t.
BlockSdp diag_sdp(double t) {
  BlockSdp sdp;
  const auto y = sdp.add_psd_block(2);
  sdp.add_cost(y, SymMatrix::identity(2));
  const int r = sdp.add_row(t);
  sdp.add_term(r, y, SymMatrix::from_rows({{1, 0}, {0, -1}}));
  return sdp;
}

struct Planted {
  BlockSdp sdp;
  double value;
};

// Interior primal and dual points are sampled first; b and C follow from them,
// so both sides are strictly feasible. The optimum is then unknown, but the
// duality gap must close.
Planted planted_instance(std::mt19937_64& rng, const std::vector<int>& dims, int n_nonneg, int n_free, int rows) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> pos(0.5, 2.0);
  BlockSdp sdp;
  std::vector<PsdBlockId> blocks;
  std::vector<SymMatrix> x0, s0;
  for (int k : dims) {
    blocks.push_back(sdp.add_psd_block(k));
    x0.push_back(random_pd(rng, k));
    s0.push_back(random_pd(rng, k));
  }
  std::vector<NonnegId> nn;
  std::vector<double> xn, sn;
  for (int i = 0; i < n_nonneg; ++i) {
    nn.push_back(sdp.add_nonneg());
    xn.push_back(pos(rng));
    sn.push_back(pos(rng));
  }
  std::vector<FreeId> fr;
  std::vector<double> xf;
  for (int i = 0; i < n_free; ++i) {
    fr.push_back(sdp.add_free());
    xf.push_back(g(rng));
  }
  Vector u0(rows);
  for (int j = 0; j < rows; ++j) u0(j) = g(rng);

  std::vector<SymMatrix> cost = s0;
  std::vector<double> cn = sn;
  std::vector<double> cf(static_cast<std::size_t>(n_free), 0.0);
  for (int j = 0; j < rows; ++j) {
    double rhs = 0.0;
    const int r = sdp.add_row(0.0);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const SymMatrix a = random_sym(rng, dims[b]);
      sdp.add_term(r, blocks[b], a);
      rhs += a.dot(x0[b]);
      cost[b] += u0(j) * a;
    }
    for (std::size_t i = 0; i < nn.size(); ++i) {
      const double a = g(rng);
      sdp.add_term(r, nn[i], a);
      rhs += a * xn[i];
      cn[i] += u0(j) * a;
    }
    for (std::size_t i = 0; i < fr.size(); ++i) {
      const double a = g(rng);
      sdp.add_term(r, fr[i], a);
      rhs += a * xf[i];
      cf[i] += u0(j) * a;
    }
    sdp.set_rhs(r, rhs);
  }
  for (std::size_t b = 0; b < blocks.size(); ++b) sdp.add_cost(blocks[b], cost[b]);
  for (std::size_t i = 0; i < nn.size(); ++i) sdp.add_cost(nn[i], cn[i]);
  for (std::size_t i = 0; i < fr.size(); ++i) sdp.add_cost(fr[i], cf[i]);
  return {std::move(sdp), 0.0};
}

}  // namespace

TEST_CASE("trace minimization with one fixed diagonal entry") {
  BlockSdp sdp;
  const auto y = sdp.add_psd_block(1);
  sdp.add_cost(y, SymMatrix::identity(1));
  const int r = sdp.add_row(1.0);
  sdp.add_term(r, y, SymMatrix::identity(1));
  const auto sol = solve(sdp);
  CHECK(sol.status == SolveStatus::Optimal);
  CHECK(sol.pobj == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(sol.dobj == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(sol.dual(0) == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("non-attainment example at t = 0 is solved exactly") {
  const auto sol = solve(nonattain_sdp(0.0));
  CHECK(sol.status == SolveStatus::Optimal);
  CHECK(std::abs(sol.pobj) <= 1e-8);
  CHECK(std::abs(sol.dobj) <= 1e-8);
}

TEST_CASE("non-attainment example at t != 0 reports diverging primal iterates") {
  for (double t : {-3.0, 1.0, 5.0, 100.0}) {
    const auto sol = solve(nonattain_sdp(t));
    INFO("t ", t, " status ", to_string(sol.status), " pobj ", sol.pobj, " iters ", sol.iterations);
    CHECK((sol.status == SolveStatus::DivergingIterates || sol.status == SolveStatus::NearOptimal));
    CHECK(sol.primal_norm_warning);
    CHECK(std::abs(sol.pobj) <= 1e-4);
    CHECK(std::abs(sol.dobj) <= 1e-6);
  }
}

TEST_CASE("diag recourse problem gives |t|") {
  for (double t : {-2.5, -1.0, 0.0, 0.3, 3.0}) {
    const auto sol = solve(diag_sdp(t));
    CHECK(sol.status == SolveStatus::Optimal);
    CHECK(sol.pobj == doctest::Approx(std::abs(t)).epsilon(1e-8));
  }
}

TEST_CASE("infeasible and unbounded problems are classified") {
  SUBCASE("psd variable forced negative") {
    BlockSdp sdp;
    const auto y = sdp.add_psd_block(2);
    const int r = sdp.add_row(-1.0);
    sdp.add_term(r, y, SymMatrix::identity(2));
    CHECK(solve(sdp).status == SolveStatus::PrimalInfeasible);
  }
  SUBCASE("unbounded free direction") {
    BlockSdp sdp;
    const auto y = sdp.add_psd_block(2);
    sdp.add_cost(y, SymMatrix::from_rows({{-1, 0}, {0, 0}}));
    const int r = sdp.add_row(1.0);
    sdp.add_term(r, y, SymMatrix::from_rows({{0, 0}, {0, 1}}));
    CHECK(solve(sdp).status == SolveStatus::DualInfeasible);
  }
  SUBCASE("contradictory duplicate rows") {
    BlockSdp sdp;
    const auto y = sdp.add_psd_block(2);
    sdp.add_cost(y, SymMatrix::identity(2));
    sdp.add_term(sdp.add_row(1.0), y, SymMatrix::identity(2));
    sdp.add_term(sdp.add_row(3.0), y, 2.0 * SymMatrix::identity(2));
    CHECK(solve(sdp).status == SolveStatus::PrimalInfeasible);
  }
}

TEST_CASE("dependent consistent rows are dropped with a warning") {
  BlockSdp sdp;
  const auto y = sdp.add_psd_block(2);
  sdp.add_cost(y, SymMatrix::identity(2));
  sdp.add_term(sdp.add_row(1.0), y, SymMatrix::unit(2, 0, 0));
  sdp.add_term(sdp.add_row(2.0), y, 2.0 * SymMatrix::unit(2, 0, 0));
  const auto sol = solve(sdp);
  CHECK(sol.status == SolveStatus::Optimal);
  CHECK(sol.dropped_rows == 1);
  CHECK_FALSE(sol.warnings.empty());
  CHECK(sol.pobj == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("free and nonnegative scalars") {
  // min x_f + 2 x_n  s.t.  x_f - x_n = 1,  x_f + Y11 = 3,  Y psd (2x2), cost tr Y.
  BlockSdp sdp;
  const auto y = sdp.add_psd_block(2);
  sdp.add_cost(y, SymMatrix::identity(2));
  const auto f = sdp.add_free(1.0);
  const auto n = sdp.add_nonneg(2.0);
  const int r0 = sdp.add_row(1.0);
  sdp.add_term(r0, f, 1.0);
  sdp.add_term(r0, n, -1.0);
  const int r1 = sdp.add_row(3.0);
  sdp.add_term(r1, f, 1.0);
  sdp.add_term(r1, y, SymMatrix::unit(2, 0, 0));
  // x_f = 1 + x_n, Y11 = 2 - x_n: cost = 1 + x_n + 2 x_n + 2 - x_n = 3 + 2 x_n -> x_n = 0.
  const auto sol = solve(sdp);
  CHECK(sol.status == SolveStatus::Optimal);
  CHECK(sol.pobj == doctest::Approx(3.0).epsilon(1e-8));
  CHECK(sol.primal.free(0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("planted random instances close the duality gap") {
  std::mt19937_64 rng(20240611);
  std::uniform_int_distribution<int> kd(1, 4), cnt(0, 3), nrows(1, 6);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<int> dims;
    const int nb = 1 + trial % 3;
    for (int b = 0; b < nb; ++b) dims.push_back(kd(rng));
    const int nf = cnt(rng) % 2;
    auto inst = planted_instance(rng, dims, cnt(rng), nf, nrows(rng));
    const auto sol = solve(inst.sdp);
    INFO("trial ", trial, " status ", to_string(sol.status));
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(std::abs(sol.pobj - sol.dobj) <= 1e-7 * (1.0 + std::abs(sol.pobj)));
    // Weak duality and the Lagrangian identity b'u = dobj.
    CHECK(sol.pobj >= sol.dobj - 1e-8 * (1.0 + std::abs(sol.pobj)));
    CHECK(inst.sdp.rhs().dot(sol.dual) == doctest::Approx(sol.dobj).epsilon(1e-8));
    // Dual slacks are PSD.
    for (const auto& s : sol.dual_slack) CHECK(s.min_eigenvalue() >= -1e-8);
    CHECK(inst.sdp.objective(sol.primal) == doctest::Approx(sol.pobj).epsilon(1e-9));
  }
}

TEST_CASE("dual strict feasibility margin") {
  SUBCASE("diag instance has margin 1") {
    const auto r = strict_feasibility_margin(diag_sdp(0.0), MarginSide::Dual);
    CHECK(r.margin == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(std::abs(r.witness(0)) <= 1e-6);
  }
  SUBCASE("non-attainment example has margin 0") {
    const auto r = strict_feasibility_margin(nonattain_sdp(0.0), MarginSide::Dual);
    CHECK(std::abs(r.margin) <= 1e-7);
  }
  SUBCASE("empty dual feasible set is flagged") {
    // C - u*I psd and C - u*(-I) psd with C = -I: impossible.
    BlockSdp sdp;
    const auto y = sdp.add_psd_block(2);
    sdp.add_cost(y, -1.0 * SymMatrix::identity(2));
    sdp.add_term(sdp.add_row(0.0), y, SymMatrix::unit(2, 0, 1));
    const auto r = strict_feasibility_margin(sdp, MarginSide::Dual);
    CHECK(r.empty);
    CHECK(r.margin == doctest::Approx(-1.0).epsilon(1e-7));
  }
  SUBCASE("infeasible free-variable equations give -inf") {
    // d_f - E_f'u = 0 with d_f = 1 and E_f = 0 has no solution u.
    BlockSdp sdp;
    const auto y = sdp.add_psd_block(2);
    sdp.add_cost(y, SymMatrix::identity(2));
    sdp.add_free(1.0);
    sdp.add_term(sdp.add_row(0.0), y, SymMatrix::unit(2, 0, 0));
    const auto r = strict_feasibility_margin(sdp, MarginSide::Dual);
    CHECK(r.empty);
    CHECK(r.margin == -std::numeric_limits<double>::infinity());
  }
}

TEST_CASE("primal strict feasibility margin") {
  // Y psd 2x2 with Y11 + Y22 = 2: largest lambda is 1 at Y = I.
  BlockSdp sdp;
  const auto y = sdp.add_psd_block(2);
  sdp.add_term(sdp.add_row(2.0), y, SymMatrix::identity(2));
  const auto r = strict_feasibility_margin(sdp, MarginSide::Primal);
  CHECK(r.margin == doctest::Approx(1.0).epsilon(1e-7));
  // Y12 = 1 and Y11 = 1 force Y22 >= 1 but the set has no interior in the face Y11 = Y12.
  BlockSdp thin;
  const auto z = thin.add_psd_block(2);
  thin.add_term(thin.add_row(1.0), z, SymMatrix::unit(2, 0, 0));
  thin.add_term(thin.add_row(2.0), z, SymMatrix::unit(2, 0, 1));
  thin.add_term(thin.add_row(1.0), z, SymMatrix::unit(2, 1, 1));
  const auto rt = strict_feasibility_margin(thin, MarginSide::Primal);
  CHECK(std::abs(rt.margin) <= 1e-6);
}

TEST_CASE("dimension mismatches are rejected when building") {
  BlockSdp sdp;
  const auto y = sdp.add_psd_block(2);
  const int r = sdp.add_row(1.0);
  CHECK_THROWS_AS(sdp.add_term(r, y, SymMatrix::identity(3)), std::invalid_argument);
}
