#include "stosdp/errors.hpp"
#include "stosdp/extensive.hpp"
#include "stosdp/recourse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace stosdp {

BigMReport compute_big_M(const ProblemData& p, const ScenarioSet& scen) {
  require_valid(p, scen);
  if (!p.X.is_compact()) throw PreconditionError("compute_big_M: X must be compact (set a trace cap)");
  const RecourseOracle oracle(p);
  if (!oracle.verified()) throw PreconditionError("compute_big_M: A1 and A2 must hold to bound the recourse cost");

  BigMReport rep;
  const double L = oracle.lipschitz_bound();
  const double tnorm = p.T.norm();
  const double rx = p.X.radius();
  {
    std::ostringstream os;
    os.precision(17);
    os << "L_hat = " << L << ", |T| = " << tnorm << ", R_X = " << rx;
    rep.trace.push_back(os.str());
  }

  // LB_i: min q.y over {T.x + W.y = z_i, x in X, y psd}, i.e. the single-scenario model with c = 0.
  ProblemData zero_c = p;
  zero_c.c = SymMatrix::zero(p.n);
  double lb_min = std::numeric_limits<double>::infinity();
  for (int i = 0; i < scen.size(); ++i) {
    const ScenarioSet one{{Scenario{1.0, scen[i].z}}};
    const SdpSolution sol = solve(build_risk_neutral(zero_c, one).sdp, recourse_solver_options());
    if (!(sol.usable() || sol.status == SolveStatus::DivergingIterates)) {
      throw SolverError("compute_big_M: lower bound of scenario " + std::to_string(i) + " returned " + to_string(sol.status));
    }
    ScenarioBounds b;
    b.lower = sol.pobj;
    b.upper = L * (scen[i].z.norm() + tnorm * rx);
    rep.per_scenario.push_back(b);
    lb_min = std::min(lb_min, b.lower);
    rep.eta_upper = i == 0 ? b.upper : std::max(rep.eta_upper, b.upper);

    std::ostringstream os;
    os.precision(17);
    os << "scenario " << i << ": LB = " << b.lower << " (" << to_string(sol.status) << "), UB = " << b.upper;
    rep.trace.push_back(os.str());
  }
  rep.M = std::max(rep.eta_upper - lb_min, 0.0) + 1.0;
  std::ostringstream os;
  os.precision(17);
  os << "M = UB_eta - min LB + 1 = " << rep.eta_upper << " - " << lb_min << " + 1 = " << rep.M;
  rep.trace.push_back(os.str());
  return rep;
}

}  // namespace stosdp
