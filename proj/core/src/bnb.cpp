#include "stosdp/decompose.hpp"
#include "stosdp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace stosdp {
namespace {

constexpr double kMassTol = 1e-12;

struct NodeOrder {
  bool operator()(const BnbNode& a, const BnbNode& b) const {
    if (a.bound != b.bound) return a.bound < b.bound;
    if (a.depth != b.depth) return a.depth > b.depth;
    return a.id < b.id;
  }
};

int nonneg_of(const ExtensiveForm& ef, Role r, int i) { return std::get<NonnegId>(ef.var_map.at({r, i})).index; }

// Copy of the form's SDP with delta_i = v substituted for every fixed i. Each fixed
// delta_i is kept only in its own box row delta_i + t_i = 1, where it floats freely,
// so no variable is pinned to the boundary of its cone.
BlockSdp with_fixed(const ExtensiveForm& ef, const std::map<int, int>& fixed) {
  const BlockSdp& src = ef.sdp;
  std::map<int, std::pair<int, int>> sub;  // delta index -> (t index, value)
  for (const auto& [i, v] : fixed) sub[nonneg_of(ef, Role::Delta, i)] = {nonneg_of(ef, Role::DeltaSlack, i), v};

  BlockSdp out;
  for (std::size_t b = 0; b < src.psd_dims().size(); ++b) {
    const auto id = out.add_psd_block(src.psd_dims()[b]);
    out.add_cost(id, src.psd_costs()[b]);
  }
  for (double c : src.nonneg_costs()) out.add_nonneg(c);
  for (double c : src.free_costs()) out.add_free(c);
  for (const ConstraintRow& r : src.rows()) {
    double rhs = r.rhs;
    std::vector<std::pair<int, double>> kept;
    for (const auto& [k, a] : r.nonneg) {
      const auto it = sub.find(k);
      const bool box = it != sub.end() && std::any_of(r.nonneg.begin(), r.nonneg.end(),
                                                      [&](const auto& t) { return t.first == it->second.first; });
      if (it != sub.end() && !box) {
        rhs -= a * it->second.second;
      } else {
        kept.emplace_back(k, a);
      }
    }
    const int j = out.add_row(rhs);
    for (const auto& [b, a] : r.psd) out.add_term(j, PsdBlockId{b}, a);
    for (const auto& [k, a] : kept) out.add_term(j, NonnegId{k}, a);
    for (const auto& [k, a] : r.free) out.add_term(j, FreeId{k}, a);
  }
  return out;
}

}  // namespace

BnbResult bnb_solve_var(const ProblemData& p, const ScenarioSet& scen, double alpha, double rho, const BnbOptions& opts) {
  const ExtensiveForm ef = build_var(p, scen, alpha, rho, opts.build);
  const int S = scen.size();

  BnbResult res;
  res.big_M = *ef.big_M;
  double open_lower = std::numeric_limits<double>::infinity();

  auto relax = [&](const std::map<int, int>& fixed) {
    const SdpSolution sol = solve(with_fixed(ef, fixed), opts.sdp);
    if (!(sol.usable() || sol.status == SolveStatus::PrimalInfeasible)) {
      throw SolverError("bnb_solve_var: node relaxation returned " + to_string(sol.status));
    }
    return sol;
  };
  auto delta_of = [&](const SdpSolution& sol, const std::map<int, int>& fixed) {
    std::vector<double> d(static_cast<std::size_t>(S));
    for (int i = 0; i < S; ++i) {
      const auto f = fixed.find(i);
      d[static_cast<std::size_t>(i)] =
          f != fixed.end() ? f->second : sol.primal.nonneg(nonneg_of(ef, Role::Delta, i));
    }
    return d;
  };
  auto offer = [&](const SdpSolution& sol, const std::vector<int>& pattern) {
    if (res.has_incumbent && sol.pobj >= res.value) return;
    const ExtensiveSolution es = extract(ef, sol);
    res.has_incumbent = true;
    res.value = sol.pobj;
    res.x = es.x;
    res.delta = pattern;
    res.eta = es.eta.at(0);
    res.scenario_costs = es.scenario_costs;
  };
  auto prunable = [&](double bound) {
    return res.has_incumbent && bound >= res.value - opts.tol * (1.0 + std::abs(res.value));
  };

  std::set<BnbNode, NodeOrder> queue;
  int next_id = 0;
  queue.insert(BnbNode{next_id++, -1, 0, {}, -std::numeric_limits<double>::infinity()});

  while (!queue.empty()) {
    if (res.nodes >= opts.max_nodes) break;
    BnbNode node = *queue.begin();
    queue.erase(queue.begin());
    BnbNodeRecord rec{node.id, node.parent, node.depth, node.bound, std::nan(""), ""};

    if (prunable(node.bound)) {
      rec.outcome = "pruned-bound";
      open_lower = std::min(open_lower, node.bound);
      res.log.push_back(rec);
      continue;
    }
    // Knapsack sum_i pi_i delta_i >= alpha: prune when the reachable mass falls short,
    // and fix delta_i = 1 whenever the remaining mass cannot reach alpha without i.
    double chosen = 0.0, open = 0.0;
    for (int i = 0; i < S; ++i) {
      const auto f = node.fixed.find(i);
      if (f == node.fixed.end()) {
        open += scen[i].prob;
      } else if (f->second == 1) {
        chosen += scen[i].prob;
      }
    }
    if (chosen + open < alpha - kMassTol) {
      rec.outcome = "pruned-knapsack";
      ++res.knapsack_pruned;
      res.log.push_back(rec);
      continue;
    }
    for (int i = 0; i < S; ++i) {
      if (!node.fixed.count(i) && chosen + open - scen[i].prob < alpha - kMassTol) {
        node.fixed[i] = 1;
        ++res.knapsack_pruned;
      }
    }

    ++res.nodes;
    const SdpSolution sol = relax(node.fixed);
    if (sol.status == SolveStatus::PrimalInfeasible) {
      rec.outcome = "infeasible";
      res.log.push_back(rec);
      continue;
    }
    rec.bound = sol.pobj;
    const std::vector<double> d = delta_of(sol, node.fixed);

    int branch = -1;
    double most = opts.integrality_tol;
    for (int i = 0; i < S; ++i) {
      const double frac = std::min(d[static_cast<std::size_t>(i)], 1.0 - d[static_cast<std::size_t>(i)]);
      if (frac > most) {
        most = frac;
        branch = i;
      }
    }
    if (branch < 0) {
      rec.outcome = "integral";
      std::map<int, int> all;
      std::vector<int> pattern;
      for (int i = 0; i < S; ++i) {
        pattern.push_back(d[static_cast<std::size_t>(i)] > 0.5 ? 1 : 0);
        all[i] = pattern.back();
      }
      if (static_cast<int>(node.fixed.size()) == S) {
        offer(sol, pattern);
      } else {
        // Re-solve with the rounded pattern fixed so the incumbent is exactly feasible.
        const SdpSolution leaf = relax(all);
        if (leaf.usable()) offer(leaf, pattern);
      }
      res.log.push_back(rec);
      continue;
    }
    rec.outcome = "branched";
    res.log.push_back(rec);
    for (int v : {0, 1}) {
      BnbNode child{next_id++, node.id, node.depth + 1, node.fixed, sol.pobj};
      child.fixed[branch] = v;
      queue.insert(std::move(child));
    }
  }

  for (const BnbNode& n : queue) open_lower = std::min(open_lower, n.bound);
  res.status = queue.empty() ? RunStatus::Converged : RunStatus::NotConverged;
  if (res.has_incumbent) {
    res.lower = std::min(res.value, open_lower);
  } else {
    res.lower = open_lower;
    if (queue.empty()) throw SolverError("bnb_solve_var: no feasible indicator pattern");
  }
  return res;
}

}  // namespace stosdp
