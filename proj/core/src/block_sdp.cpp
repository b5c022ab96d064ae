#include "stosdp/block_sdp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace stosdp {

PsdBlockId BlockSdp::add_psd_block(int dim) {
  if (dim < 1) throw std::invalid_argument("add_psd_block: dimension must be >= 1");
  psd_dims_.push_back(dim);
  psd_cost_.push_back(SymMatrix::zero(dim));
  return PsdBlockId{num_psd_blocks() - 1};
}

NonnegId BlockSdp::add_nonneg(double cost) {
  nonneg_cost_.push_back(cost);
  return NonnegId{num_nonneg() - 1};
}

FreeId BlockSdp::add_free(double cost) {
  free_cost_.push_back(cost);
  return FreeId{num_free() - 1};
}

void BlockSdp::add_cost(PsdBlockId b, const SymMatrix& c) {
  psd_cost_.at(static_cast<std::size_t>(b.index)) += c;
}

void BlockSdp::add_cost(NonnegId v, double c) { nonneg_cost_.at(static_cast<std::size_t>(v.index)) += c; }

void BlockSdp::add_cost(FreeId v, double c) { free_cost_.at(static_cast<std::size_t>(v.index)) += c; }

int BlockSdp::add_row(double rhs) {
  ConstraintRow r;
  r.rhs = rhs;
  rows_.push_back(std::move(r));
  return num_rows() - 1;
}

void BlockSdp::add_term(int row, PsdBlockId b, const SymMatrix& a) {
  if (b.index < 0 || b.index >= num_psd_blocks()) throw std::invalid_argument("add_term: unknown PSD block");
  if (a.dim() != psd_dims_[static_cast<std::size_t>(b.index)]) {
    throw std::invalid_argument("add_term: coefficient dim does not match block " + std::to_string(b.index));
  }
  rows_.at(static_cast<std::size_t>(row)).psd.emplace_back(b.index, a);
}

void BlockSdp::add_term(int row, NonnegId v, double a) {
  if (v.index < 0 || v.index >= num_nonneg()) throw std::invalid_argument("add_term: unknown nonneg variable");
  rows_.at(static_cast<std::size_t>(row)).nonneg.emplace_back(v.index, a);
}

void BlockSdp::add_term(int row, FreeId v, double a) {
  if (v.index < 0 || v.index >= num_free()) throw std::invalid_argument("add_term: unknown free variable");
  rows_.at(static_cast<std::size_t>(row)).free.emplace_back(v.index, a);
}

void BlockSdp::set_rhs(int row, double rhs) { rows_.at(static_cast<std::size_t>(row)).rhs = rhs; }

Vector BlockSdp::rhs() const {
  Vector b(num_rows());
  for (int j = 0; j < num_rows(); ++j) b(j) = rows_[static_cast<std::size_t>(j)].rhs;
  return b;
}

int BlockSdp::barrier_degree() const {
  int nu = num_nonneg();
  for (int k : psd_dims_) nu += k;
  return nu;
}

double BlockSdp::objective(const SdpPoint& x) const {
  double v = 0.0;
  for (int b = 0; b < num_psd_blocks(); ++b) {
    v += psd_cost_[static_cast<std::size_t>(b)].dot(x.psd[static_cast<std::size_t>(b)]);
  }
  for (int i = 0; i < num_nonneg(); ++i) v += nonneg_cost_[static_cast<std::size_t>(i)] * x.nonneg(i);
  for (int i = 0; i < num_free(); ++i) v += free_cost_[static_cast<std::size_t>(i)] * x.free(i);
  return v;
}

Vector BlockSdp::apply(const SdpPoint& x) const {
  Vector out = Vector::Zero(num_rows());
  for (int j = 0; j < num_rows(); ++j) {
    const auto& r = rows_[static_cast<std::size_t>(j)];
    double v = 0.0;
    for (const auto& [b, a] : r.psd) v += a.dot(x.psd[static_cast<std::size_t>(b)]);
    for (const auto& [i, a] : r.nonneg) v += a * x.nonneg(i);
    for (const auto& [i, a] : r.free) v += a * x.free(i);
    out(j) = v;
  }
  return out;
}

SdpPoint BlockSdp::zero_point() const {
  SdpPoint p;
  for (int k : psd_dims_) p.psd.push_back(SymMatrix::zero(k));
  p.nonneg = Vector::Zero(num_nonneg());
  p.free = Vector::Zero(num_free());
  return p;
}

void BlockSdp::check() const {
  for (int b = 0; b < num_psd_blocks(); ++b) {
    if (!psd_cost_[static_cast<std::size_t>(b)].is_finite()) {
      throw std::invalid_argument("BlockSdp: cost of block " + std::to_string(b) + " is not finite");
    }
  }
  for (double c : nonneg_cost_) {
    if (!std::isfinite(c)) throw std::invalid_argument("BlockSdp: nonneg cost is not finite");
  }
  for (double c : free_cost_) {
    if (!std::isfinite(c)) throw std::invalid_argument("BlockSdp: free cost is not finite");
  }
  for (int j = 0; j < num_rows(); ++j) {
    const auto& r = rows_[static_cast<std::size_t>(j)];
    const std::string where = "BlockSdp row " + std::to_string(j) + ": ";
    if (!std::isfinite(r.rhs)) throw std::invalid_argument(where + "rhs is not finite");
    for (const auto& [b, a] : r.psd) {
      if (b < 0 || b >= num_psd_blocks()) throw std::invalid_argument(where + "unknown block");
      if (a.dim() != psd_dims_[static_cast<std::size_t>(b)]) throw std::invalid_argument(where + "block dim mismatch");
      if (!a.is_finite()) throw std::invalid_argument(where + "non-finite coefficient");
    }
    for (const auto& [i, a] : r.nonneg) {
      if (i < 0 || i >= num_nonneg() || !std::isfinite(a)) throw std::invalid_argument(where + "bad nonneg term");
    }
    for (const auto& [i, a] : r.free) {
      if (i < 0 || i >= num_free() || !std::isfinite(a)) throw std::invalid_argument(where + "bad free term");
    }
  }
}

namespace {

struct DenseRow {
  std::vector<Matrix> psd;
  Vector nonneg;
  Vector free;
};

DenseRow densify(const BlockSdp& s, const ConstraintRow& r) {
  DenseRow d;
  for (int k : s.psd_dims()) d.psd.push_back(Matrix::Zero(k, k));
  d.nonneg = Vector::Zero(s.num_nonneg());
  d.free = Vector::Zero(s.num_free());
  for (const auto& [b, a] : r.psd) d.psd[static_cast<std::size_t>(b)] += a.matrix();
  for (const auto& [i, a] : r.nonneg) d.nonneg(i) += a;
  for (const auto& [i, a] : r.free) d.free(i) += a;
  return d;
}

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol * (1.0 + std::abs(a)); }

}  // namespace

bool structurally_equal(const BlockSdp& a, const BlockSdp& b, double tol) {
  if (a.psd_dims_ != b.psd_dims_ || a.num_nonneg() != b.num_nonneg() || a.num_free() != b.num_free() ||
      a.num_rows() != b.num_rows()) {
    return false;
  }
  for (int k = 0; k < a.num_psd_blocks(); ++k) {
    const auto& ca = a.psd_cost_[static_cast<std::size_t>(k)].matrix();
    const auto& cb = b.psd_cost_[static_cast<std::size_t>(k)].matrix();
    if ((ca - cb).cwiseAbs().maxCoeff() > tol * (1.0 + ca.cwiseAbs().maxCoeff())) return false;
  }
  for (int i = 0; i < a.num_nonneg(); ++i) {
    if (!close(a.nonneg_cost_[static_cast<std::size_t>(i)], b.nonneg_cost_[static_cast<std::size_t>(i)], tol)) return false;
  }
  for (int i = 0; i < a.num_free(); ++i) {
    if (!close(a.free_cost_[static_cast<std::size_t>(i)], b.free_cost_[static_cast<std::size_t>(i)], tol)) return false;
  }
  for (int j = 0; j < a.num_rows(); ++j) {
    const auto& ra = a.rows_[static_cast<std::size_t>(j)];
    const auto& rb = b.rows_[static_cast<std::size_t>(j)];
    if (!close(ra.rhs, rb.rhs, tol)) return false;
    const DenseRow da = densify(a, ra);
    const DenseRow db = densify(b, rb);
    for (std::size_t k = 0; k < da.psd.size(); ++k) {
      if ((da.psd[k] - db.psd[k]).cwiseAbs().maxCoeff() > tol * (1.0 + da.psd[k].cwiseAbs().maxCoeff())) return false;
    }
    if (a.num_nonneg() > 0 && (da.nonneg - db.nonneg).cwiseAbs().maxCoeff() > tol * (1.0 + da.nonneg.cwiseAbs().maxCoeff())) {
      return false;
    }
    if (a.num_free() > 0 && (da.free - db.free).cwiseAbs().maxCoeff() > tol * (1.0 + da.free.cwiseAbs().maxCoeff())) {
      return false;
    }
  }
  return true;
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::NearOptimal: return "NearOptimal";
    case SolveStatus::PrimalInfeasible: return "PrimalInfeasible";
    case SolveStatus::DualInfeasible: return "DualInfeasible";
    case SolveStatus::DivergingIterates: return "DivergingIterates";
    case SolveStatus::IterLimit: return "IterLimit";
    case SolveStatus::NumericalFailure: return "NumericalFailure";
  }
  return "Unknown";
}

}  // namespace stosdp
