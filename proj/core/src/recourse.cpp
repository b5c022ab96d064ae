#include "stosdp/recourse.hpp"

#include "stosdp/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

namespace stosdp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint64_t kPerturbSeed = 0x9e3779b97f4a7c15ULL;

// Row selector for the (i, j) entry of a symmetric matrix.
SymMatrix entry_selector(int k, int i, int j) {
  return i == j ? SymMatrix::unit(k, i, i) : 0.5 * SymMatrix::unit(k, i, j);
}

// Rows  Z + sum_k v_k W_k = rhs  entrywise (upper triangle); returns the ids.
struct SlackSystem {
  PsdBlockId z;
  std::vector<FreeId> v;
};

SlackSystem add_slack_system(BlockSdp& sdp, const ProblemData& p, const Matrix& rhs) {
  SlackSystem sys;
  sys.z = sdp.add_psd_block(p.m);
  for (int k = 0; k < p.s; ++k) sys.v.push_back(sdp.add_free());
  for (int i = 0; i < p.m; ++i) {
    for (int j = i; j < p.m; ++j) {
      const int r = sdp.add_row(rhs(i, j));
      sdp.add_term(r, sys.z, entry_selector(p.m, i, j));
      for (int k = 0; k < p.s; ++k) {
        const double w = p.W[k](i, j);
        if (w != 0.0) sdp.add_term(r, sys.v[static_cast<std::size_t>(k)], w);
      }
    }
  }
  return sys;
}

}  // namespace

SolverOptions recourse_solver_options() {
  SolverOptions o;
  o.feas_tol = 1e-10;
  o.gap_tol = 1e-10;
  o.near_optimal_tol = 1e-7;
  return o;
}

A2Result check_A2(const ProblemData& p, const SolverOptions& opts) {
  const auto margin = strict_feasibility_margin(recourse_primal_sdp(p, Vector::Zero(p.s)), MarginSide::Dual, opts);
  A2Result res;
  res.margin = margin.margin;
  res.witness = margin.witness;
  res.holds = margin.margin > kA2MarginTol;
  return res;
}

namespace {

A1Result recession_probe(const ProblemData& p, bool a2, const SolverOptions& opts) {
  // Recession cone of M_D: {v : -W'v psd}. Probe it inside the unit box.
  BlockSdp base;
  const SlackSystem sys = add_slack_system(base, p, Matrix::Zero(p.m, p.m));
  for (int k = 0; k < p.s; ++k) {
    const auto lo = base.add_nonneg();
    const auto hi = base.add_nonneg();
    const int r1 = base.add_row(1.0);
    base.add_term(r1, sys.v[static_cast<std::size_t>(k)], 1.0);
    base.add_term(r1, lo, 1.0);
    const int r2 = base.add_row(1.0);
    base.add_term(r2, sys.v[static_cast<std::size_t>(k)], -1.0);
    base.add_term(r2, hi, 1.0);
  }

  A1Result res;
  res.holds = true;
  double worst = 0.0;
  for (int i = 0; i < p.s; ++i) {
    for (double sign : {1.0, -1.0}) {
      BlockSdp probe = base;
      probe.add_cost(sys.v[static_cast<std::size_t>(i)], -sign);
      const SdpSolution sol = solve(probe, opts);
      if (!sol.usable()) {
        throw SolverError("check_A1: direction probe " + std::to_string(i) + " returned " + to_string(sol.status));
      }
      const double opt = -sol.pobj;
      res.direction_optima.push_back(opt);
      if (opt > kA1DirectionTol && opt > worst) {
        worst = opt;
        res.holds = false;
        Vector v = sol.primal.free;
        v /= v.cwiseAbs().maxCoeff();
        res.recession_direction = v;
      }
    }
  }
  std::ostringstream os;
  if (res.holds) {
    os << "all " << 2 * p.s << " direction optima are 0 (max " << *std::max_element(res.direction_optima.begin(), res.direction_optima.end())
       << "); M_D is bounded";
  } else {
    os << "M_D contains the ray u0 + t*v, v = (";
    for (Eigen::Index k = 0; k < res.recession_direction->size(); ++k) {
      os << (k > 0 ? ", " : "") << (*res.recession_direction)(k);
    }
    os << ")";
  }
  if (!a2) os << " [A2 fails: the recession test characterizes A1 only under A2]";
  res.certificate = os.str();
  res.a2_held = a2;
  return res;
}

}  // namespace

A1Result check_A1(const ProblemData& p, const SolverOptions& opts) {
  return recession_probe(p, check_A2(p, opts).holds, opts);
}

BlockSdp recourse_primal_sdp(const ProblemData& p, const Vector& t) {
  if (t.size() != p.s) throw DimensionError("recourse_primal_sdp: t has the wrong length");
  BlockSdp sdp;
  const auto y = sdp.add_psd_block(p.m);
  sdp.add_cost(y, p.q);
  for (int j = 0; j < p.s; ++j) {
    const int r = sdp.add_row(t(j));
    sdp.add_term(r, y, p.W[j]);
  }
  return sdp;
}

RecourseOracle::RecourseOracle(ProblemData p, SolverOptions opts) : p_(std::move(p)), opts_(opts) {
  require_valid(p_, ScenarioSet{{Scenario{1.0, Vector::Zero(p_.s)}}});
  add_slack_system(dual_template_, p_, p_.q.matrix());
  a2_ = check_A2(p_, opts_);
  if (a2_.holds) a1_ = recession_probe(p_, true, opts_);
  if (verified()) compute_lipschitz();
}

RecourseOracle::RecourseOracle(ProblemData p, SolverOptions opts, Unverified) : p_(std::move(p)), opts_(opts) {
  require_valid(p_, ScenarioSet{{Scenario{1.0, Vector::Zero(p_.s)}}});
  add_slack_system(dual_template_, p_, p_.q.matrix());
  override_ = true;
  a2_ = check_A2(p_, opts_);
  a1_ = recession_probe(p_, a2_.holds, opts_);
  compute_lipschitz();
}

RecourseOracle RecourseOracle::allow_unverified(ProblemData p, SolverOptions opts) {
  return RecourseOracle(std::move(p), opts, Unverified{});
}

void RecourseOracle::require_usable() const {
  if (verified() || override_) return;
  std::string why = a2_.holds ? "A1 (complete recourse) does not hold" : "A2 (strict dual feasibility) does not hold";
  throw PreconditionError("RecourseOracle: " + why + "; use allow_unverified to evaluate anyway");
}

void RecourseOracle::compute_lipschitz() {
  double best = 0.0;
  for (int i = 0; i < p_.s; ++i) {
    for (double sign : {1.0, -1.0}) {
      Vector e = Vector::Zero(p_.s);
      e(i) = sign;
      SolveStatus st;
      double value = 0.0;
      solve_dual(e, st, value);
      best = std::max(best, value);
    }
  }
  lipschitz_ = std::sqrt(static_cast<double>(p_.s)) * best;
}

Vector RecourseOracle::solve_dual(const Vector& t, SolveStatus& status, double& value) const {
  BlockSdp sdp = dual_template_;
  for (int k = 0; k < p_.s; ++k) sdp.add_cost(FreeId{k}, -t(k));
  const SdpSolution sol = solve(sdp, opts_);
  status = sol.status;
  switch (sol.status) {
    case SolveStatus::DualInfeasible:
      value = kInf;  // t outside W.S_+: the primal recourse problem is infeasible
      return Vector::Zero(p_.s);
    case SolveStatus::PrimalInfeasible:
      value = -kInf;  // M_D empty
      return Vector::Zero(p_.s);
    case SolveStatus::Optimal:
    case SolveStatus::NearOptimal:
    case SolveStatus::DivergingIterates:
      break;
    default:
      throw SolverError("eval_phi: solver returned " + to_string(sol.status));
  }
  const Vector u = sol.primal.free;
  value = t.dot(u);
  return u;
}

PhiValue RecourseOracle::eval_phi(const Vector& t, bool check_unique) const {
  require_usable();
  if (t.size() != p_.s) throw DimensionError("eval_phi: t has length " + std::to_string(t.size()) + ", expected " + std::to_string(p_.s));
  PhiValue res;
  res.sub.u = solve_dual(t, res.status, res.value);
  if (check_unique && std::isfinite(res.value)) {
    std::mt19937_64 rng(kPerturbSeed);
    std::normal_distribution<double> g;
    Vector r(p_.s);
    for (int k = 0; k < p_.s; ++k) r(k) = g(rng);
    r /= r.norm();
    const double eps = 1e-6 * std::max(1.0, t.norm());
    SolveStatus st;
    double v = 0.0;
    const Vector up = solve_dual(t + eps * r, st, v);
    const Vector um = solve_dual(t - eps * r, st, v);
    res.sub.certificate = (up - um).norm();
    res.sub.unique = res.sub.certificate <= kUniquenessTol;
  }
  return res;
}

double RecourseOracle::eval_f(const SymMatrix& x, const Vector& z) const {
  if (x.dim() != p_.n) throw DimensionError("eval_f: x has the wrong dimension");
  if (z.size() != p_.s) throw DimensionError("eval_f: z has the wrong length");
  return p_.c.dot(x) + eval_phi(z - frobenius_pair(p_.T, x), false).value;
}

std::vector<PhiValue> RecourseOracle::eval_scenarios(const ScenarioSet& scen, const SymMatrix& x, int threads,
                                                     bool check_unique) const {
  require_usable();
  if (x.dim() != p_.n) throw DimensionError("eval_scenarios: x has the wrong dimension");
  const Vector tx = frobenius_pair(p_.T, x);
  const int n = scen.size();
  std::vector<PhiValue> out(static_cast<std::size_t>(n));
  const int workers = std::clamp(threads, 1, std::max(1, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = eval_phi(scen[i].z - tx, check_unique);
    return out;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = next++; i < n; i = next++) out[static_cast<std::size_t>(i)] = eval_phi(scen[i].z - tx, check_unique);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

double RecourseOracle::expected_cost(const ScenarioSet& scen, const SymMatrix& x) const {
  const auto phis = eval_scenarios(scen, x);
  double v = p_.c.dot(x);
  for (int i = 0; i < scen.size(); ++i) v += scen[i].prob * phis[static_cast<std::size_t>(i)].value;
  return v;
}

SymMatrix RecourseOracle::subgrad_QE(const ScenarioSet& scen, const SymMatrix& x) const {
  const auto phis = eval_scenarios(scen, x);
  Vector w = Vector::Zero(p_.s);
  for (int i = 0; i < scen.size(); ++i) w += scen[i].prob * phis[static_cast<std::size_t>(i)].sub.u;
  return p_.c - adjoint_apply(p_.T, w);
}

}  // namespace stosdp
