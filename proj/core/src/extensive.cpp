#include "stosdp/extensive.hpp"

#include "stosdp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace stosdp {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

class Builder {
 public:
  Builder(const ProblemData& p, const ScenarioSet& scen, RiskSpec spec, ModelKind kind)
      : ef((require_valid(p, scen), p), scen, std::move(spec), kind), S(scen.size()) {}

  // x block, y blocks, coupling rows and X's rows. Objective x_mult * c.x + sum_i pi_i y_mult q.y_i.
  void base(double x_mult, double y_mult) {
    const ProblemData& p = ef.problem;
    x = ef.sdp.add_psd_block(p.n);
    ef.var_map[{Role::X, 0}] = x;
    if (x_mult != 0.0) ef.sdp.add_cost(x, x_mult * p.c);
    for (int i = 0; i < S; ++i) {
      const auto yi = ef.sdp.add_psd_block(p.m);
      y.push_back(yi);
      ef.var_map[{Role::Y, i}] = yi;
      if (y_mult != 0.0) ef.sdp.add_cost(yi, (y_mult * ef.scenarios[i].prob) * p.q);
    }
    for (int i = 0; i < S; ++i) {
      for (int j = 0; j < p.s; ++j) {
        const int r = ef.sdp.add_row(ef.scenarios[i].z(j));
        ef.sdp.add_term(r, x, p.T[j]);
        ef.sdp.add_term(r, y[static_cast<std::size_t>(i)], p.W[j]);
      }
    }
    for (const auto& e : p.X.equalities) {
      const int r = ef.sdp.add_row(e.rhs);
      ef.sdp.add_term(r, x, e.coeff);
    }
    for (const auto& h : p.X.inequalities) {
      const int r = ef.sdp.add_row(h.rhs);
      ef.sdp.add_term(r, x, h.coeff);
      slack(r, 1.0);
    }
    if (p.X.trace_cap) {
      const int r = ef.sdp.add_row(*p.X.trace_cap);
      ef.sdp.add_term(r, x, SymMatrix::identity(p.n));
      slack(r, 1.0);
    }
  }

  NonnegId slack(int row, double coef) {
    const auto s = ef.sdp.add_nonneg();
    ef.sdp.add_term(row, s, coef);
    ef.var_map[{Role::Slack, static_cast<int>(ef.slack_rows.size())}] = s;
    ef.slack_rows.push_back(row);
    return s;
  }

  NonnegId nonneg(Role r, int index, double cost = 0.0) {
    const auto v = ef.sdp.add_nonneg(cost);
    ef.var_map[{r, index}] = v;
    return v;
  }

  FreeId free(Role r, int index, double cost = 0.0) {
    const auto v = ef.sdp.add_free(cost);
    ef.var_map[{r, index}] = v;
    return v;
  }

  // sign * (c.x + q.y_i) into row r; the c.x part only when with_c.
  void cost_terms(int r, int i, double sign, bool with_c = true) {
    if (with_c) ef.sdp.add_term(r, x, sign * ef.problem.c);
    ef.sdp.add_term(r, y[static_cast<std::size_t>(i)], sign * ef.problem.q);
  }

  // One CVaR term weight * (eta + 1/(1-alpha) sum_i pi_i v_i), rows v_i >= c.x + q.y_i - eta.
  void cvar_term(int term, double alpha, double weight) {
    const auto eta = free(Role::Eta, term, weight);
    for (int i = 0; i < S; ++i) {
      const auto v = nonneg(Role::V, term * S + i, weight * ef.scenarios[i].prob / (1.0 - alpha));
      const int r = ef.sdp.add_row(0.0);
      cost_terms(r, i, 1.0);
      ef.sdp.add_term(r, eta, -1.0);
      ef.sdp.add_term(r, v, -1.0);
      slack(r, 1.0);
    }
    ef.term_alpha.push_back(alpha);
  }

  ExtensiveForm ef;
  int S = 0;
  PsdBlockId x;
  std::vector<PsdBlockId> y;
};

void require_rho(double rho, const char* what) {
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw std::invalid_argument(std::string(what) + ": rho must be >= 0");
}

void require_alpha(double alpha, const char* what) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument(std::string(what) + ": alpha must lie in (0, 1)");
}

double row_activity_without(const BlockSdp& sdp, int row, const SdpPoint& pt, int skip_nonneg, double& coef) {
  const ConstraintRow& r = sdp.row(row);
  double act = 0.0;
  for (const auto& [b, a] : r.psd) act += a.dot(pt.psd[static_cast<std::size_t>(b)]);
  coef = 0.0;
  for (const auto& [k, a] : r.nonneg) {
    if (k == skip_nonneg) {
      coef += a;
    } else {
      act += a * pt.nonneg(k);
    }
  }
  for (const auto& [k, a] : r.free) act += a * pt.free(k);
  return act;
}

}  // namespace

std::string to_string(Role r) {
  switch (r) {
    case Role::X: return "x";
    case Role::Y: return "y";
    case Role::V: return "v";
    case Role::Eta: return "eta";
    case Role::W: return "w";
    case Role::Delta: return "delta";
    case Role::DeltaSlack: return "delta_slack";
    case Role::Arrow: return "arrow";
    case Role::Slack: return "slack";
  }
  return "?";
}

std::optional<VarLocation> ExtensiveForm::find(Role r, int index) const {
  const auto it = var_map.find({r, index});
  if (it == var_map.end()) return std::nullopt;
  return it->second;
}

PsdBlockId ExtensiveForm::x_block() const { return std::get<PsdBlockId>(var_map.at({Role::X, 0})); }

PsdBlockId ExtensiveForm::y_block(int scenario) const { return std::get<PsdBlockId>(var_map.at({Role::Y, scenario})); }

ExtensiveForm build_risk_neutral(const ProblemData& p, const ScenarioSet& scen) {
  Builder b(p, scen, Expectation{}, ModelKind::RiskNeutral);
  b.base(1.0, 1.0);
  return std::move(b.ef);
}

ExtensiveForm build_ee(const ProblemData& p, const ScenarioSet& scen, double eta, double rho) {
  require_rho(rho, "build_ee");
  if (!std::isfinite(eta)) throw std::invalid_argument("build_ee: eta must be finite");
  Builder b(p, scen, MeanRisk{ExpectedExcess{eta}, rho}, ModelKind::ExpectedExcess);
  b.ef.ee_eta = eta;
  b.ef.rho = rho;
  b.base(1.0, 1.0);
  for (int i = 0; i < b.S; ++i) {
    const auto v = b.nonneg(Role::V, i, rho * scen[i].prob);
    const int r = b.ef.sdp.add_row(eta);
    b.cost_terms(r, i, 1.0);
    b.ef.sdp.add_term(r, v, -1.0);
    b.slack(r, 1.0);
  }
  return std::move(b.ef);
}

ExtensiveForm build_cvar(const ProblemData& p, const ScenarioSet& scen, double alpha, double rho) {
  require_rho(rho, "build_cvar");
  require_alpha(alpha, "build_cvar");
  Builder b(p, scen, MeanRisk{CVaR{alpha}, rho}, ModelKind::CVaR);
  b.ef.rho = rho;
  b.base(1.0, 1.0);
  b.cvar_term(0, alpha, rho);
  return std::move(b.ef);
}

ExtensiveForm build_cvar_mixture(const ProblemData& p, const ScenarioSet& scen, const CVaRMixture& mix,
                                 std::optional<double> rho) {
  validate(RiskSpec{mix});
  if (rho) require_rho(*rho, "build_cvar_mixture");
  RiskSpec spec = mix;
  if (rho) spec = MeanRisk{mix, *rho};
  Builder b(p, scen, spec, ModelKind::CVaR);
  const double scale = rho.value_or(1.0);
  double mean = rho ? 1.0 : 0.0;
  for (const auto& [w, a] : mix.terms) {
    if (a == 0.0) mean += scale * w;
  }
  b.ef.rho = scale;
  b.base(mean, mean);
  int term = 0;
  for (const auto& [w, a] : mix.terms) {
    if (a > 0.0) b.cvar_term(term++, a, scale * w);
  }
  return std::move(b.ef);
}

ExtensiveForm build_var(const ProblemData& p, const ScenarioSet& scen, double alpha, double rho, const BuildOptions& opts) {
  require_rho(rho, "build_var");
  require_alpha(alpha, "build_var");
  if (!p.X.is_compact()) throw PreconditionError("build_var: X must be compact (set a trace cap)");
  Builder b(p, scen, MeanRisk{VaR{alpha}, rho}, ModelKind::VaR);
  b.ef.var_alpha = alpha;
  b.ef.rho = rho;
  b.ef.literal = opts.literal;

  std::optional<double> eta_cap;
  double M = 0.0;
  if (opts.big_M) {
    M = *opts.big_M;
    if (!(M > 0.0) || !std::isfinite(M)) throw std::invalid_argument("build_var: big_M must be positive");
  } else {
    const BigMReport rep = compute_big_M(p, scen);
    M = rep.M;
    eta_cap = rep.eta_upper + 1.0;
  }
  b.ef.big_M = M;

  b.base(1.0 + rho, 1.0);
  const auto eta = b.free(Role::Eta, 0, rho);
  const int knap = b.ef.sdp.add_row(alpha);
  for (int i = 0; i < b.S; ++i) {
    const auto d = b.nonneg(Role::Delta, i);
    const auto t = b.nonneg(Role::DeltaSlack, i);
    b.ef.binary_indices.push_back(d.index);
    const int box = b.ef.sdp.add_row(1.0);
    b.ef.sdp.add_term(box, d, 1.0);
    b.ef.sdp.add_term(box, t, 1.0);
    b.ef.sdp.add_term(knap, d, scen[i].prob);

    const int r = b.ef.sdp.add_row(M);
    if (opts.literal) {
      // eta - q.y_i >= (1 - delta_i) M
      b.ef.sdp.add_term(r, eta, 1.0);
      b.cost_terms(r, i, -1.0, false);
      b.ef.sdp.add_term(r, d, M);
      b.slack(r, -1.0);
    } else {
      // q.y_i - eta <= (1 - delta_i) M
      b.cost_terms(r, i, 1.0, false);
      b.ef.sdp.add_term(r, eta, -1.0);
      b.ef.sdp.add_term(r, d, M);
      b.slack(r, 1.0);
    }
  }
  b.slack(knap, -1.0);
  if (eta_cap && !opts.literal) {
    const int r = b.ef.sdp.add_row(*eta_cap);
    b.ef.sdp.add_term(r, eta, 1.0);
    b.slack(r, 1.0);
  }
  return std::move(b.ef);
}

ExtensiveForm build_mad(const ProblemData& p, const ScenarioSet& scen, int pp, double rho, const BuildOptions& opts) {
  require_rho(rho, "build_mad");
  if (pp != 1 && pp != 2) throw std::invalid_argument("build_mad: order must be 1 or 2, got " + std::to_string(pp));
  Builder b(p, scen, mean_upper_semidev(pp, rho), ModelKind::Mad);
  b.ef.mad_order = pp;
  b.ef.rho = rho;
  b.ef.literal = opts.literal;
  b.base(1.0, 1.0);
  std::vector<NonnegId> v;
  for (int i = 0; i < b.S; ++i) {
    v.push_back(b.nonneg(Role::V, i, pp == 1 ? rho * scen[i].prob : 0.0));
    // v_i >= q.y_i - sum_j pi_j q.y_j  (+ c.x when literal)
    const int r = b.ef.sdp.add_row(0.0);
    b.cost_terms(r, i, 1.0, opts.literal);
    for (int j = 0; j < b.S; ++j) b.cost_terms(r, j, -scen[j].prob, false);
    b.ef.sdp.add_term(r, v.back(), -1.0);
    b.slack(r, 1.0);
  }
  if (pp == 2) {
    // [[w, a'], [a, w I]] psd with a_i = sqrt(pi_i) v_i, i.e. w >= |a|.
    const auto w = b.free(Role::W, 0, rho);
    const int k = b.S + 1;
    const auto arrow = b.ef.sdp.add_psd_block(k);
    b.ef.var_map[{Role::Arrow, 0}] = arrow;
    for (int i = 0; i < k; ++i) {
      const int r = b.ef.sdp.add_row(0.0);
      b.ef.sdp.add_term(r, arrow, SymMatrix::unit(k, i, i));
      b.ef.sdp.add_term(r, w, -1.0);
    }
    for (int i = 0; i < b.S; ++i) {
      const int r = b.ef.sdp.add_row(0.0);
      b.ef.sdp.add_term(r, arrow, 0.5 * SymMatrix::unit(k, 0, i + 1));
      b.ef.sdp.add_term(r, v[static_cast<std::size_t>(i)], -std::sqrt(scen[i].prob));
    }
    for (int i = 1; i < k; ++i) {
      for (int j = i + 1; j < k; ++j) {
        const int r = b.ef.sdp.add_row(0.0);
        b.ef.sdp.add_term(r, arrow, 0.5 * SymMatrix::unit(k, i, j));
      }
    }
  }
  return std::move(b.ef);
}

ExtensiveForm build_model(const ProblemData& p, const ScenarioSet& scen, const RiskSpec& spec, const BuildOptions& opts) {
  validate(spec);
  return std::visit(
      overloaded{
          [&](const Expectation&) { return build_risk_neutral(p, scen); },
          [&](const CVaR& c) { return build_cvar_mixture(p, scen, CVaRMixture{{{1.0, c.alpha}}}); },
          [&](const CVaRMixture& m) { return build_cvar_mixture(p, scen, m); },
          [&](const MeanRisk& m) {
            return std::visit(
                overloaded{
                    [&](const ExpectedExcess& e) { return build_ee(p, scen, e.eta, m.rho); },
                    [&](const CVaR& c) { return build_cvar(p, scen, c.alpha, m.rho); },
                    [&](const VaR& v) { return build_var(p, scen, v.alpha, m.rho, opts); },
                    [&](const UpperSemidev& u) { return build_mad(p, scen, u.p, m.rho, opts); },
                    [&](const CVaRMixture& mix) {
                      return build_cvar_mixture(p, scen, mix, m.rho);
                    },
                },
                m.base);
          },
          [&](const auto&) -> ExtensiveForm {
            throw std::invalid_argument("build_model: no extensive form for " + to_string(spec));
          },
      },
      spec);
}

SdpPoint assemble_point(const ExtensiveForm& ef, const SymMatrix& x, const std::vector<SymMatrix>& y,
                        const std::optional<std::vector<int>>& delta) {
  const ProblemData& p = ef.problem;
  const int S = ef.scenarios.size();
  if (x.dim() != p.n) throw DimensionError("assemble_point: x has the wrong dimension");
  if (static_cast<int>(y.size()) != S) throw DimensionError("assemble_point: one y block per scenario is required");
  SdpPoint pt = ef.sdp.zero_point();
  pt.psd[static_cast<std::size_t>(ef.x_block().index)] = x;
  std::vector<Atom> total, second;
  for (int i = 0; i < S; ++i) {
    const SymMatrix& yi = y[static_cast<std::size_t>(i)];
    if (yi.dim() != p.m) throw DimensionError("assemble_point: y block has the wrong dimension");
    pt.psd[static_cast<std::size_t>(ef.y_block(i).index)] = yi;
    second.push_back({ef.scenarios[i].prob, p.q.dot(yi)});
    total.push_back({ef.scenarios[i].prob, p.c.dot(x) + p.q.dot(yi)});
  }
  const DiscreteDist ftot(total);
  const DiscreteDist fsec(second);
  auto set_nonneg = [&](Role r, int idx, double v) { pt.nonneg(std::get<NonnegId>(ef.var_map.at({r, idx})).index) = v; };
  auto set_free = [&](Role r, int idx, double v) { pt.free(std::get<FreeId>(ef.var_map.at({r, idx})).index) = v; };

  switch (ef.kind) {
    case ModelKind::RiskNeutral:
      break;
    case ModelKind::ExpectedExcess:
      for (int i = 0; i < S; ++i) set_nonneg(Role::V, i, std::max(total[static_cast<std::size_t>(i)].value - ef.ee_eta, 0.0));
      break;
    case ModelKind::CVaR:
      for (std::size_t t = 0; t < ef.term_alpha.size(); ++t) {
        const double eta = cvar(ftot, ef.term_alpha[t]).eta;
        set_free(Role::Eta, static_cast<int>(t), eta);
        for (int i = 0; i < S; ++i) {
          set_nonneg(Role::V, static_cast<int>(t) * S + i, std::max(total[static_cast<std::size_t>(i)].value - eta, 0.0));
        }
      }
      break;
    case ModelKind::VaR: {
      std::vector<int> d(static_cast<std::size_t>(S));
      double eta = value_at_risk(fsec, ef.var_alpha);
      if (delta) {
        if (static_cast<int>(delta->size()) != S) throw DimensionError("assemble_point: one delta per scenario is required");
        d = *delta;
        eta = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < S; ++i) {
          if (d[static_cast<std::size_t>(i)]) eta = std::max(eta, second[static_cast<std::size_t>(i)].value);
        }
        if (!std::isfinite(eta)) eta = value_at_risk(fsec, ef.var_alpha);
      } else {
        for (int i = 0; i < S; ++i) d[static_cast<std::size_t>(i)] = second[static_cast<std::size_t>(i)].value <= eta ? 1 : 0;
      }
      set_free(Role::Eta, 0, eta);
      for (int i = 0; i < S; ++i) {
        set_nonneg(Role::Delta, i, d[static_cast<std::size_t>(i)]);
        set_nonneg(Role::DeltaSlack, i, 1 - d[static_cast<std::size_t>(i)]);
      }
      break;
    }
    case ModelKind::Mad: {
      const double mean = expectation(fsec);
      const double shift = ef.literal ? p.c.dot(x) : 0.0;
      double sq = 0.0;
      std::vector<double> v(static_cast<std::size_t>(S));
      for (int i = 0; i < S; ++i) {
        v[static_cast<std::size_t>(i)] = std::max(second[static_cast<std::size_t>(i)].value - mean + shift, 0.0);
        set_nonneg(Role::V, i, v[static_cast<std::size_t>(i)]);
        sq += ef.scenarios[i].prob * v[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(i)];
      }
      if (ef.mad_order == 2) {
        const double w = std::sqrt(sq);
        set_free(Role::W, 0, w);
        Matrix a = w * Matrix::Identity(S + 1, S + 1);
        for (int i = 0; i < S; ++i) {
          a(0, i + 1) = a(i + 1, 0) = std::sqrt(ef.scenarios[i].prob) * v[static_cast<std::size_t>(i)];
        }
        pt.psd[static_cast<std::size_t>(std::get<PsdBlockId>(ef.var_map.at({Role::Arrow, 0})).index)] = SymMatrix(a);
      }
      break;
    }
  }

  for (std::size_t k = 0; k < ef.slack_rows.size(); ++k) {
    const int idx = std::get<NonnegId>(ef.var_map.at({Role::Slack, static_cast<int>(k)})).index;
    double coef = 0.0;
    const double act = row_activity_without(ef.sdp, ef.slack_rows[k], pt, idx, coef);
    pt.nonneg(idx) = (ef.sdp.row(ef.slack_rows[k]).rhs - act) / coef;
  }
  return pt;
}

ExtensiveSolution extract(const ExtensiveForm& ef, const SdpSolution& sol) {
  ExtensiveSolution out;
  out.status = sol.status;
  out.value = sol.pobj;
  out.raw = sol;
  if (sol.primal.psd.empty()) return out;
  out.x = sol.primal.psd[static_cast<std::size_t>(ef.x_block().index)];
  for (int i = 0; i < ef.scenarios.size(); ++i) {
    out.y.push_back(sol.primal.psd[static_cast<std::size_t>(ef.y_block(i).index)]);
    out.scenario_costs.push_back(ef.problem.q.dot(out.y.back()));
  }
  for (int t = 0;; ++t) {
    const auto eta = ef.find(Role::Eta, t);
    if (!eta) break;
    out.eta.push_back(sol.primal.free(std::get<FreeId>(*eta).index));
  }
  for (int i = 0;; ++i) {
    const auto d = ef.find(Role::Delta, i);
    if (!d) break;
    out.delta.push_back(sol.primal.nonneg(std::get<NonnegId>(*d).index));
  }
  return out;
}

ExtensiveSolution solve_extensive(const ExtensiveForm& ef, const SolverOptions& opts) {
  if (!ef.binary_indices.empty()) {
    throw PreconditionError("solve_extensive: the form has binary variables; use branch and bound");
  }
  return extract(ef, solve(ef.sdp, opts));
}

}  // namespace stosdp
