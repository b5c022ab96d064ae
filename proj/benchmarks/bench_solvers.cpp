#include <benchmark/benchmark.h>

#include <stosdp/decompose.hpp>
#include <stosdp/extensive.hpp>
#include <stosdp/recourse.hpp>

#include <random>

namespace {

using namespace stosdp;

SymMatrix gaussian_sym(std::mt19937_64& rng, int k) {
  std::normal_distribution<double> g;
  Matrix a(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) a(i, j) = g(rng);
  }
  return SymMatrix::symmetrized(a);
}

// q positive definite and W orthogonal to a positive definite Y0, so both
// assumptions hold.
ProblemData instance(int n, int m, int s, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  const Matrix b = gaussian_sym(rng, m).matrix();
  const SymMatrix y0 = SymMatrix::symmetrized(b * b + Matrix::Identity(m, m));
  std::vector<SymMatrix> w, t;
  for (int j = 0; j < s; ++j) {
    const SymMatrix a = gaussian_sym(rng, m);
    w.push_back(a - (a.dot(y0) / y0.dot(y0)) * y0);
    t.push_back(gaussian_sym(rng, n));
  }
  const Matrix c = gaussian_sym(rng, m).matrix();
  return ProblemData{n,          m, s, gaussian_sym(rng, n), SymMatrix::symmetrized(c * c + Matrix::Identity(m, m)),
                     MatrixTuple(std::move(t)), MatrixTuple(std::move(w)), Spectrahedron::trace_ball(n, 2.0)};
}

ScenarioSet scenarios(int count, int s, std::uint64_t seed = 2) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  ScenarioSet out;
  for (int i = 0; i < count; ++i) {
    Vector z(s);
    for (int j = 0; j < s; ++j) z(j) = g(rng);
    out.scenarios.push_back({1.0 / count, z});
  }
  return out;
}

void BM_EvalPhi(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const RecourseOracle o(instance(2, m, 3));
  const Vector t = scenarios(1, 3)[0].z;
  for (auto _ : state) benchmark::DoNotOptimize(o.eval_phi(t, false).value);
}
BENCHMARK(BM_EvalPhi)->Arg(3)->Arg(5)->Arg(8)->Unit(benchmark::kMicrosecond);

void BM_ExtensiveRiskNeutral(benchmark::State& state) {
  const int S = static_cast<int>(state.range(0));
  const ProblemData p = instance(3, 3, 2);
  const ExtensiveForm ef = build_risk_neutral(p, scenarios(S, 2));
  for (auto _ : state) benchmark::DoNotOptimize(solve_extensive(ef).value);
  state.SetComplexityN(S);
}
BENCHMARK(BM_ExtensiveRiskNeutral)->RangeMultiplier(2)->Range(2, 32)->Complexity()->Unit(benchmark::kMillisecond);

void BM_ExtensiveCvar(benchmark::State& state) {
  const int S = static_cast<int>(state.range(0));
  const ProblemData p = instance(3, 3, 2);
  const ExtensiveForm ef = build_model(p, scenarios(S, 2), MeanRisk{CVaR{0.8}, 1.0});
  for (auto _ : state) benchmark::DoNotOptimize(solve_extensive(ef).value);
}
BENCHMARK(BM_ExtensiveCvar)->RangeMultiplier(2)->Range(2, 32)->Unit(benchmark::kMillisecond);

void BM_BendersCvar(benchmark::State& state) {
  const int S = static_cast<int>(state.range(0));
  const ProblemData p = instance(3, 3, 2);
  const ScenarioSet scen = scenarios(S, 2);
  BendersOptions opts;
  opts.single_cut = state.range(1) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(benders_solve(p, scen, MeanRisk{CVaR{0.8}, 1.0}, opts).value);
}
BENCHMARK(BM_BendersCvar)
    ->ArgsProduct({{4, 16, 32}, {0, 1}})
    ->ArgNames({"S", "single_cut"})
    ->Unit(benchmark::kMillisecond);

void BM_BnbVar(benchmark::State& state) {
  const int S = static_cast<int>(state.range(0));
  const ProblemData p = instance(2, 2, 1);
  const ScenarioSet scen = scenarios(S, 1);
  for (auto _ : state) {
    const auto r = bnb_solve_var(p, scen, 0.6, 1.0);
    state.counters["nodes"] = r.nodes;
    benchmark::DoNotOptimize(r.value);
  }
}
BENCHMARK(BM_BnbVar)->DenseRange(2, 8, 2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
