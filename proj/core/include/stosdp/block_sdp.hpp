#pragma once

#include "stosdp/sym_matrix.hpp"

#include <compare>
#include <limits>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace stosdp {

struct PsdBlockId {
  int index = -1;
  auto operator<=>(const PsdBlockId&) const = default;
};
struct NonnegId {
  int index = -1;
  auto operator<=>(const NonnegId&) const = default;
};
struct FreeId {
  int index = -1;
  auto operator<=>(const FreeId&) const = default;
};

/// Location of one variable (PSD block or scalar) inside a BlockSdp.
using VarLocation = std::variant<PsdBlockId, NonnegId, FreeId>;

/// One equality row  sum_b A_b . X_b + e_nonneg . x_nonneg + e_free . x_free = rhs.
/// Terms are sparse; repeated terms for the same variable add up.
struct ConstraintRow {
  std::vector<std::pair<int, SymMatrix>> psd;
  std::vector<std::pair<int, double>> nonneg;
  std::vector<std::pair<int, double>> free;
  double rhs = 0.0;
};

/// Values for every variable of a BlockSdp.
struct SdpPoint {
  std::vector<SymMatrix> psd;
  Vector nonneg;
  Vector free;
};

/// Standard-form block SDP
///
///   min  sum_b C_b . X_b + d_nonneg' x_nonneg + d_free' x_free
///   s.t. one equality row per ConstraintRow,
///        X_b in S^{k_b}_+,  x_nonneg >= 0,  x_free free.
///
/// Its dual is  max b'u  s.t.  C_b - sum_j u_j A_jb in S_+,  d_nonneg - E_n' u >= 0,
/// d_free - E_f' u = 0.  Nonnegative scalars are 1x1 PSD blocks in the math; they are
/// stored as a diagonal cone so large models stay cheap.
class BlockSdp {
 public:
  PsdBlockId add_psd_block(int dim);
  NonnegId add_nonneg(double cost = 0.0);
  FreeId add_free(double cost = 0.0);

  void add_cost(PsdBlockId b, const SymMatrix& c);
  void add_cost(NonnegId v, double c);
  void add_cost(FreeId v, double c);

  /// Appends an empty row with the given right-hand side; returns its index.
  int add_row(double rhs);
  void add_term(int row, PsdBlockId b, const SymMatrix& a);
  void add_term(int row, NonnegId v, double a);
  void add_term(int row, FreeId v, double a);
  void set_rhs(int row, double rhs);

  int num_psd_blocks() const { return static_cast<int>(psd_dims_.size()); }
  int num_nonneg() const { return static_cast<int>(nonneg_cost_.size()); }
  int num_free() const { return static_cast<int>(free_cost_.size()); }
  int num_rows() const { return static_cast<int>(rows_.size()); }
  const std::vector<int>& psd_dims() const { return psd_dims_; }
  int psd_dim(PsdBlockId b) const { return psd_dims_.at(static_cast<std::size_t>(b.index)); }

  const SymMatrix& cost(PsdBlockId b) const { return psd_cost_.at(static_cast<std::size_t>(b.index)); }
  const std::vector<SymMatrix>& psd_costs() const { return psd_cost_; }
  const std::vector<double>& nonneg_costs() const { return nonneg_cost_; }
  const std::vector<double>& free_costs() const { return free_cost_; }
  const std::vector<ConstraintRow>& rows() const { return rows_; }
  const ConstraintRow& row(int j) const { return rows_.at(static_cast<std::size_t>(j)); }
  Vector rhs() const;

  /// Cone degree: sum of block dims plus the number of nonnegative scalars.
  int barrier_degree() const;

  /// Objective value at a point (no feasibility check).
  double objective(const SdpPoint& x) const;
  /// Row activities A(x).
  Vector apply(const SdpPoint& x) const;
  /// Zero point with the right shapes.
  SdpPoint zero_point() const;

  /// Throws std::invalid_argument when a term references a missing variable, dims
  /// disagree, or some datum is not finite.
  void check() const;

  /// Dense per-row/per-variable comparison, independent of how terms were split.
  friend bool structurally_equal(const BlockSdp& a, const BlockSdp& b, double tol);

 private:
  std::vector<int> psd_dims_;
  std::vector<SymMatrix> psd_cost_;
  std::vector<double> nonneg_cost_;
  std::vector<double> free_cost_;
  std::vector<ConstraintRow> rows_;
};

bool structurally_equal(const BlockSdp& a, const BlockSdp& b, double tol = 0.0);

enum class SolveStatus {
  Optimal,
  NearOptimal,
  PrimalInfeasible,
  DualInfeasible,
  DivergingIterates,
  IterLimit,
  NumericalFailure,
};

std::string to_string(SolveStatus s);

struct SolverOptions {
  double feas_tol = 1e-8;
  double gap_tol = 1e-8;
  int max_iter = 200;
  /// Iterates with norm above divergence_factor * (1 + data norm) while the gap
  /// keeps shrinking are reported as DivergingIterates.
  double divergence_factor = 1e8;
  /// Residual/gap level accepted as NearOptimal when the method stalls.
  double near_optimal_tol = 1e-6;
  /// tau/kappa below this ratio declares infeasibility in the homogeneous model.
  double infeasibility_ratio = 1e-10;
  double static_reg = 1e-12;
  double retry_reg = 1e-8;
  double step_fraction = 0.99;
  bool verbose = false;
};

struct SdpSolution {
  SolveStatus status = SolveStatus::NumericalFailure;
  SdpPoint primal;
  /// Multipliers u, one per constraint row (zero for rows dropped as dependent).
  Vector dual;
  /// Dual slack per PSD block, C_b - sum_j u_j A_jb.
  std::vector<SymMatrix> dual_slack;
  Vector dual_slack_nonneg;
  double pobj = 0.0;
  double dobj = 0.0;
  /// Complementarity X . S (after normalization).
  double gap = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
  int dropped_rows = 0;
  double primal_norm = 0.0;
  double dual_norm = 0.0;
  bool primal_norm_warning = false;
  bool dual_norm_warning = false;
  std::vector<std::string> warnings;

  bool optimal() const { return status == SolveStatus::Optimal; }
  /// Optimal or NearOptimal.
  bool usable() const { return status == SolveStatus::Optimal || status == SolveStatus::NearOptimal; }
};

/// Primal-dual interior-point solve (homogeneous self-dual model, Nesterov-Todd
/// scaling, Mehrotra predictor-corrector).
SdpSolution solve(const BlockSdp& sdp, const SolverOptions& opts = {});

enum class MarginSide { Primal, Dual };

struct MarginResult {
  /// Optimal lambda; +inf if unbounded, -inf if the margin program is infeasible.
  double margin = 0.0;
  /// The underlying set itself is empty (lambda* < -1e-7 or infeasible).
  bool empty = false;
  SolveStatus status = SolveStatus::NumericalFailure;
  /// Dual side: the witness u. Primal side: empty.
  Vector witness;
};

/// Largest lambda such that the slack (dual side: C - A'u, primal side: X) minus
/// lambda*I stays PSD (nonnegative scalars count as 1x1 blocks).
MarginResult strict_feasibility_margin(const BlockSdp& sdp, MarginSide side, const SolverOptions& opts = {});

}  // namespace stosdp
