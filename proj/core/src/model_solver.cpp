#include "stosdp/decompose.hpp"

#include <stdexcept>

namespace stosdp {
namespace {

const VaR* var_base(const RiskSpec& spec) {
  const auto* m = std::get_if<MeanRisk>(&spec);
  return m ? std::get_if<VaR>(&m->base) : nullptr;
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::Extensive: return "extensive";
    case Method::Benders: return "benders";
    case Method::Bnb: return "bnb";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  if (s == "extensive") return Method::Extensive;
  if (s == "benders") return Method::Benders;
  if (s == "bnb") return Method::Bnb;
  throw std::invalid_argument("unknown method '" + s + "' (expected extensive, benders or bnb)");
}

bool method_supports(Method m, const RiskSpec& spec) {
  validate(spec);
  switch (m) {
    case Method::Bnb: return var_base(spec) != nullptr;
    case Method::Benders: {
      if (std::holds_alternative<Expectation>(spec)) return true;
      const auto* mr = std::get_if<MeanRisk>(&spec);
      return mr && (std::holds_alternative<ExpectedExcess>(mr->base) || std::holds_alternative<CVaR>(mr->base));
    }
    case Method::Extensive: {
      if (std::holds_alternative<Expectation>(spec) || std::holds_alternative<CVaR>(spec) ||
          std::holds_alternative<CVaRMixture>(spec)) {
        return true;
      }
      return std::holds_alternative<MeanRisk>(spec) && var_base(spec) == nullptr;
    }
  }
  return false;
}

ModelResult solve_model(const ProblemData& p, const ScenarioSet& scen, const RiskSpec& spec, Method m,
                        const ModelOptions& opts) {
  if (!method_supports(m, spec)) {
    std::string why = "method " + to_string(m) + " does not support " + to_string(spec);
    if (var_base(spec)) why += "; VaR models have binaries and need --method bnb";
    throw std::invalid_argument(why);
  }
  ModelResult r;
  r.method = m;
  switch (m) {
    case Method::Extensive: {
      const ExtensiveSolution es = solve_extensive(build_model(p, scen, spec), opts.sdp);
      r.status = to_string(es.status);
      r.ok = es.raw.usable();
      r.value = r.lower = r.upper = es.value;
      r.x = es.x;
      r.scenario_costs = es.scenario_costs;
      r.eta = es.eta;
      r.iterations = es.raw.iterations;
      break;
    }
    case Method::Benders: {
      BendersOptions bo = opts.benders;
      bo.threads = opts.threads;
      BendersResult br = benders_solve(p, scen, spec, bo);
      r.ok = br.status == RunStatus::Converged;
      r.status = r.ok ? "Optimal" : "NotConverged";
      r.value = br.value;
      r.lower = br.lower;
      r.upper = br.upper;
      r.x = br.x;
      r.scenario_costs = br.scenario_costs;
      r.iterations = static_cast<int>(br.history.size());
      r.cuts = std::move(br.cuts);
      break;
    }
    case Method::Bnb: {
      const auto& mr = std::get<MeanRisk>(spec);
      const BnbResult br = bnb_solve_var(p, scen, var_base(spec)->alpha, mr.rho, opts.bnb);
      r.ok = br.status == RunStatus::Converged;
      r.status = r.ok ? "Optimal" : "NotConverged";
      r.value = r.upper = br.value;
      r.lower = br.lower;
      r.x = br.x;
      r.scenario_costs = br.scenario_costs;
      r.eta = {br.eta};
      r.delta = br.delta;
      r.nodes = br.nodes;
      break;
    }
  }
  return r;
}

}  // namespace stosdp
