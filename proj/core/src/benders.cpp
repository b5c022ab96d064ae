#include "stosdp/decompose.hpp"
#include "stosdp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace stosdp {
namespace {

constexpr double kDuplicateTol = 1e-9;

enum class Shape { Expectation, ExpectedExcess, CVaR };

struct MasterModel {
  Shape shape = Shape::Expectation;
  double rho = 0.0;
  double eta = 0.0;    // EE threshold
  double alpha = 0.0;  // CVaR level
};

MasterModel classify(const RiskSpec& spec) {
  validate(spec);
  if (std::holds_alternative<Expectation>(spec)) return {};
  if (const auto* m = std::get_if<MeanRisk>(&spec)) {
    if (m->rho == 0.0) return {};
    if (const auto* e = std::get_if<ExpectedExcess>(&m->base)) return {Shape::ExpectedExcess, m->rho, e->eta, 0.0};
    if (const auto* c = std::get_if<CVaR>(&m->base)) return {Shape::CVaR, m->rho, 0.0, c->alpha};
  }
  throw std::invalid_argument("benders_solve: supports E, E+rho*EE(eta) and E+rho*CVaR(alpha), got " + to_string(spec));
}

void add_domain_rows(BlockSdp& sdp, PsdBlockId x, const Spectrahedron& X) {
  for (const auto& e : X.equalities) {
    const int r = sdp.add_row(e.rhs);
    sdp.add_term(r, x, e.coeff);
  }
  for (const auto& h : X.inequalities) {
    const int r = sdp.add_row(h.rhs);
    sdp.add_term(r, x, h.coeff);
    sdp.add_term(r, sdp.add_nonneg(), 1.0);
  }
  if (X.trace_cap) {
    const int r = sdp.add_row(*X.trace_cap);
    sdp.add_term(r, x, SymMatrix::identity(X.dim));
    sdp.add_term(r, sdp.add_nonneg(), 1.0);
  }
}

// A point of X: the minimizer of tr(x).
SymMatrix starting_point(const ProblemData& p, const SolverOptions& opts) {
  BlockSdp sdp;
  const auto x = sdp.add_psd_block(p.n);
  sdp.add_cost(x, SymMatrix::identity(p.n));
  add_domain_rows(sdp, x, p.X);
  const SdpSolution sol = solve(sdp, opts);
  if (sol.status == SolveStatus::PrimalInfeasible) throw PreconditionError("benders_solve: X is empty");
  if (!sol.usable()) throw SolverError("benders_solve: finding a point of X returned " + to_string(sol.status));
  return sol.primal.psd[0];
}

// Multi-cut master: min over x in X and theta_i of R with phi(z_i - T.x) replaced by theta_i,
// theta_i >= every cut of scenario i.
BlockSdp multi_cut_master(const ProblemData& p, const ScenarioSet& scen, const MasterModel& mm,
                          const std::vector<Cut>& cuts, PsdBlockId& x) {
  BlockSdp sdp;
  const int S = scen.size();
  x = sdp.add_psd_block(p.n);
  sdp.add_cost(x, p.c);
  add_domain_rows(sdp, x, p.X);
  std::vector<FreeId> theta;
  for (int i = 0; i < S; ++i) theta.push_back(sdp.add_free(scen[i].prob));

  if (mm.shape != Shape::Expectation) {
    // v_i >= c.x + theta_i - eta with eta fixed (EE) or a free variable (CVaR).
    std::optional<FreeId> eta;
    double vscale = mm.rho;
    if (mm.shape == Shape::CVaR) {
      eta = sdp.add_free(mm.rho);
      vscale = mm.rho / (1.0 - mm.alpha);
    }
    for (int i = 0; i < S; ++i) {
      const auto v = sdp.add_nonneg(vscale * scen[i].prob);
      const int r = sdp.add_row(mm.shape == Shape::ExpectedExcess ? mm.eta : 0.0);
      sdp.add_term(r, x, p.c);
      sdp.add_term(r, theta[static_cast<std::size_t>(i)], 1.0);
      sdp.add_term(r, v, -1.0);
      if (eta) sdp.add_term(r, *eta, -1.0);
      sdp.add_term(r, sdp.add_nonneg(), 1.0);
    }
  }
  for (const Cut& c : cuts) {
    const int r = sdp.add_row(c.offset);
    sdp.add_term(r, theta[static_cast<std::size_t>(*c.scenario)], 1.0);
    sdp.add_term(r, x, -c.g);
    sdp.add_term(r, sdp.add_nonneg(), -1.0);
  }
  return sdp;
}

// Single-cut master: min theta over x in X with theta >= every aggregate cut.
BlockSdp single_cut_master(const ProblemData& p, const std::vector<Cut>& cuts, PsdBlockId& x) {
  BlockSdp sdp;
  x = sdp.add_psd_block(p.n);
  add_domain_rows(sdp, x, p.X);
  const auto theta = sdp.add_free(1.0);
  for (const Cut& c : cuts) {
    const int r = sdp.add_row(c.offset);
    sdp.add_term(r, theta, 1.0);
    sdp.add_term(r, x, -c.g);
    sdp.add_term(r, sdp.add_nonneg(), -1.0);
  }
  return sdp;
}

}  // namespace

std::string to_string(RunStatus s) { return s == RunStatus::Converged ? "Converged" : "NotConverged"; }

std::string format_cut_log(const std::vector<Cut>& cuts) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (const Cut& c : cuts) {
    os << c.iteration << ' ';
    if (c.scenario) {
      os << *c.scenario;
    } else {
      os << "aggregate";
    }
    os << ' ' << c.offset;
    for (int i = 0; i < c.g.dim(); ++i) {
      for (int j = i; j < c.g.dim(); ++j) os << ' ' << c.g(i, j);
    }
    os << '\n';
  }
  return os.str();
}

BendersResult benders_solve(const ProblemData& p, const ScenarioSet& scen, const RiskSpec& spec,
                            const BendersOptions& opts) {
  require_valid(p, scen);
  const MasterModel mm = classify(spec);
  const RecourseOracle oracle(p);
  if (!oracle.verified()) throw PreconditionError("benders_solve: A1 and A2 must hold");
  const int S = scen.size();

  BendersResult res;
  res.lower = -std::numeric_limits<double>::infinity();
  res.upper = std::numeric_limits<double>::infinity();
  SymMatrix x = starting_point(p, opts.master);

  for (int it = 1; it <= opts.max_iter; ++it) {
    const auto phis = oracle.eval_scenarios(scen, x, opts.threads, false);
    std::vector<Atom> costs;
    std::vector<double> second;
    const double cx = p.c.dot(x);
    for (int i = 0; i < S; ++i) {
      const PhiValue& ph = phis[static_cast<std::size_t>(i)];
      if (!(ph.status == SolveStatus::Optimal || ph.status == SolveStatus::NearOptimal)) {
        throw SolverError("benders_solve: recourse of scenario " + std::to_string(i) + " returned " +
                          to_string(ph.status));
      }
      second.push_back(ph.value);
      costs.push_back({scen[i].prob, cx + ph.value});
    }
    const DiscreteDist law(costs);
    const double f = evaluate(spec, law);
    if (f < res.upper) {
      res.upper = f;
      res.x = x;
      res.scenario_costs = second;
    }

    // phi(z_i - T.x') >= u_i'(z_i - T.x') for every dual-feasible u_i.
    std::vector<SymMatrix> g;
    std::vector<double> offset;
    for (int i = 0; i < S; ++i) {
      const Vector& u = phis[static_cast<std::size_t>(i)].sub.u;
      g.push_back(-adjoint_apply(p.T, u));
      offset.push_back(u.dot(scen[i].z));
    }
    int added = 0;
    auto add = [&](Cut c) {
      // A repeated cut only degrades the conditioning of the master.
      const bool seen = std::any_of(res.cuts.begin(), res.cuts.end(), [&](const Cut& o) {
        const double scale = 1.0 + c.g.norm() + std::abs(c.offset);
        return o.scenario == c.scenario && (o.g - c.g).norm() + std::abs(o.offset - c.offset) <= kDuplicateTol * scale;
      });
      if (seen) return;
      res.cuts.push_back(std::move(c));
      ++added;
    };
    if (opts.single_cut) {
      const auto w = risk_gradient_weights(spec, law);
      SymMatrix ga = SymMatrix::zero(p.n);
      for (int i = 0; i < S; ++i) ga += w[static_cast<std::size_t>(i)] * (p.c + g[static_cast<std::size_t>(i)]);
      add({ga, f - ga.dot(x), std::nullopt, it});
    } else {
      for (int i = 0; i < S; ++i) add({g[static_cast<std::size_t>(i)], offset[static_cast<std::size_t>(i)], i, it});
    }

    PsdBlockId xb;
    const BlockSdp master =
        opts.single_cut ? single_cut_master(p, res.cuts, xb) : multi_cut_master(p, scen, mm, res.cuts, xb);
    const SdpSolution sol = solve(master, opts.master);
    if (sol.status == SolveStatus::DualInfeasible) {
      throw SolverError("benders_solve: master problem is unbounded; give X a trace cap");
    }
    if (!sol.usable()) {
      std::ostringstream os;
      os << "benders_solve: master problem of iteration " << it << " returned " << to_string(sol.status)
         << " (primal residual " << sol.primal_residual << ", dual residual " << sol.dual_residual << ", gap "
         << sol.gap << (sol.warnings.empty() ? "" : "; " + sol.warnings.back()) << ")";
      throw SolverError(os.str());
    }
    res.lower = std::max(res.lower, sol.pobj);
    res.history.push_back({it, sol.pobj, res.lower, res.upper, added});
    if (res.upper - res.lower <= opts.tol * (1.0 + std::abs(res.upper))) {
      res.status = RunStatus::Converged;
      break;
    }
    x = sol.primal.psd[static_cast<std::size_t>(xb.index)];
  }
  res.value = res.upper;
  return res;
}

}  // namespace stosdp
