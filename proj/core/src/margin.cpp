#include "stosdp/block_sdp.hpp"
#include "stosdp/errors.hpp"

#include <limits>
#include <stdexcept>

namespace stosdp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEmptyTol = 1e-7;

// max lambda s.t. C - A'u - lambda*I psd, d_n - E_n'u - lambda >= 0, d_f = E_f'u.
// Its conic dual is  min C.X + d'x  s.t.  A(X, x) = 0,  sum tr X_b + sum x_n = 1.
MarginResult dual_margin(const BlockSdp& sdp, const SolverOptions& opts) {
  BlockSdp m;
  std::vector<PsdBlockId> blk;
  std::vector<NonnegId> nn;
  std::vector<FreeId> fr;
  for (int b = 0; b < sdp.num_psd_blocks(); ++b) {
    blk.push_back(m.add_psd_block(sdp.psd_dims()[static_cast<std::size_t>(b)]));
    m.add_cost(blk.back(), sdp.psd_costs()[static_cast<std::size_t>(b)]);
  }
  for (double d : sdp.nonneg_costs()) nn.push_back(m.add_nonneg(d));
  for (double d : sdp.free_costs()) fr.push_back(m.add_free(d));
  for (const auto& r : sdp.rows()) {
    const int j = m.add_row(0.0);
    for (const auto& [b, a] : r.psd) m.add_term(j, blk[static_cast<std::size_t>(b)], a);
    for (const auto& [i, a] : r.nonneg) m.add_term(j, nn[static_cast<std::size_t>(i)], a);
    for (const auto& [i, a] : r.free) m.add_term(j, fr[static_cast<std::size_t>(i)], a);
  }
  const int norm_row = m.add_row(1.0);
  for (std::size_t b = 0; b < blk.size(); ++b) m.add_term(norm_row, blk[b], SymMatrix::identity(sdp.psd_dims()[b]));
  for (const auto& v : nn) m.add_term(norm_row, v, 1.0);

  MarginResult res;
  if (blk.empty() && nn.empty()) {
    // No cone constraint on the slack: only the free-variable equalities remain.
    res.status = SolveStatus::Optimal;
    res.margin = kInf;
    res.witness = Vector::Zero(sdp.num_rows());
    return res;
  }
  const SdpSolution sol = solve(m, opts);
  res.status = sol.status;
  switch (sol.status) {
    case SolveStatus::PrimalInfeasible:
      // No nonzero cone point in the null space: the slack can be made arbitrarily positive.
      res.margin = kInf;
      break;
    case SolveStatus::DualInfeasible:
      res.margin = -kInf;
      break;
    case SolveStatus::NumericalFailure:
    case SolveStatus::IterLimit:
      throw SolverError("strict_feasibility_margin: solver returned " + to_string(sol.status));
    default:
      res.margin = sol.dobj;
      break;
  }
  res.empty = res.margin < -kEmptyTol;
  res.witness = sol.dual.size() > 0 ? Vector(sol.dual.head(sdp.num_rows())) : Vector::Zero(sdp.num_rows());
  if (sol.status == SolveStatus::PrimalInfeasible || sol.status == SolveStatus::DualInfeasible) {
    res.witness = Vector::Zero(sdp.num_rows());
  }
  return res;
}

// max lambda s.t. X - lambda*I psd, x_n - lambda >= 0, A(X, x) = b.
MarginResult primal_margin(const BlockSdp& sdp, const SolverOptions& opts) {
  BlockSdp m;
  std::vector<PsdBlockId> blk;
  std::vector<NonnegId> nn;
  std::vector<FreeId> fr;
  for (int k : sdp.psd_dims()) blk.push_back(m.add_psd_block(k));
  for (int i = 0; i < sdp.num_nonneg(); ++i) nn.push_back(m.add_nonneg());
  for (int i = 0; i < sdp.num_free(); ++i) fr.push_back(m.add_free());
  const FreeId lam = m.add_free(-1.0);
  for (const auto& r : sdp.rows()) {
    const int j = m.add_row(r.rhs);
    double lam_coef = 0.0;
    for (const auto& [b, a] : r.psd) {
      m.add_term(j, blk[static_cast<std::size_t>(b)], a);
      lam_coef += a.trace();
    }
    for (const auto& [i, a] : r.nonneg) {
      m.add_term(j, nn[static_cast<std::size_t>(i)], a);
      lam_coef += a;
    }
    for (const auto& [i, a] : r.free) m.add_term(j, fr[static_cast<std::size_t>(i)], a);
    if (lam_coef != 0.0) m.add_term(j, lam, lam_coef);
  }
  MarginResult res;
  if (blk.empty() && nn.empty()) {
    res.status = SolveStatus::Optimal;
    res.margin = kInf;
    return res;
  }
  const SdpSolution sol = solve(m, opts);
  res.status = sol.status;
  switch (sol.status) {
    case SolveStatus::PrimalInfeasible:
      res.margin = -kInf;
      break;
    case SolveStatus::DualInfeasible:
      res.margin = kInf;
      break;
    case SolveStatus::NumericalFailure:
    case SolveStatus::IterLimit:
      throw SolverError("strict_feasibility_margin: solver returned " + to_string(sol.status));
    default:
      res.margin = -sol.pobj;
      break;
  }
  res.empty = res.margin < -kEmptyTol;
  return res;
}

}  // namespace

MarginResult strict_feasibility_margin(const BlockSdp& sdp, MarginSide side, const SolverOptions& opts) {
  sdp.check();
  return side == MarginSide::Dual ? dual_margin(sdp, opts) : primal_margin(sdp, opts);
}

}  // namespace stosdp
