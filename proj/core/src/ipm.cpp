// Homogeneous self-dual interior-point method for BlockSdp.
//
// Embedding (x = (X_b, x_nonneg, x_free), s = dual slack, y = row multipliers):
//
//   A x - b tau               = 0
//  -A_K' y + c_K tau - s_K    = 0      (cone variables)
//  -A_F' y + c_F tau          = 0      (free variables)
//   b'y - c'x - kappa         = 0
//   X_b, S_b psd; x_n, s_n >= 0; tau, kappa >= 0.
//
// Each iteration linearizes the complementarity conditions in Nesterov-Todd
// scaled coordinates (X~ = R^-1 X R^-T = Lambda = R' S R = S~) and takes a
// Mehrotra predictor-corrector step. Nonnegative scalars use the 1x1 case of
// the same formulas.

#include "stosdp/block_sdp.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <optional>

namespace stosdp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kStallIterations = 8;
constexpr double kLargeNormFactor = 1e4;
constexpr std::size_t kTrendWindow = 5;
constexpr double kTrendGrowth = 4.0;

struct BlockRows {
  std::vector<int> rows;
  std::vector<Matrix> mats;
};

/// Row-reduced, densified copy of the problem data.
struct Compiled {
  int p = 0;
  std::vector<int> dims;
  std::vector<Matrix> C;
  std::vector<BlockRows> blocks;
  Matrix AL;  // p x nL
  Matrix AF;  // p x nF
  Vector cL;
  Vector cF;
  Vector b;
  std::vector<int> kept;  // original index of each kept row
  int original_rows = 0;
  int original_free = 0;
  std::vector<int> free_index;  // original index of each kept free variable
  bool inconsistent = false;
  bool free_unbounded = false;
  double data_norm = 0.0;
  double b_norm = 0.0;
  double c_norm = 0.0;
  int nu = 0;

  int nL() const { return static_cast<int>(cL.size()); }
  int nF() const { return static_cast<int>(cF.size()); }
  int nb() const { return static_cast<int>(dims.size()); }
};

/// Dense vectorization of each row: PSD blocks as full k*k, then nonneg, then free.
Matrix dense_rows(const BlockSdp& sdp, const std::vector<int>& offsets, int nvars) {
  Matrix A = Matrix::Zero(sdp.num_rows(), nvars);
  for (int j = 0; j < sdp.num_rows(); ++j) {
    const auto& r = sdp.row(j);
    for (const auto& [b, a] : r.psd) {
      const int k = a.dim();
      for (int c = 0; c < k; ++c) {
        for (int rr = 0; rr < k; ++rr) A(j, offsets[static_cast<std::size_t>(b)] + c * k + rr) += a(rr, c);
      }
    }
    const int off_l = offsets.back();
    for (const auto& [i, a] : r.nonneg) A(j, off_l + i) += a;
    for (const auto& [i, a] : r.free) A(j, off_l + sdp.num_nonneg() + i) += a;
  }
  return A;
}

Compiled compile(const BlockSdp& sdp, std::vector<std::string>& warnings) {
  Compiled cp;
  cp.original_rows = sdp.num_rows();
  cp.dims = sdp.psd_dims();
  for (const auto& c : sdp.psd_costs()) cp.C.push_back(c.matrix());
  cp.cL = Eigen::Map<const Vector>(sdp.nonneg_costs().data(), sdp.num_nonneg());
  cp.cF = Eigen::Map<const Vector>(sdp.free_costs().data(), sdp.num_free());
  cp.nu = sdp.barrier_degree();

  // Rank-revealing reduction of the row space.
  std::vector<int> offsets;
  int nvars = 0;
  for (int k : cp.dims) {
    offsets.push_back(nvars);
    nvars += k * k;
  }
  offsets.push_back(nvars);
  nvars += sdp.num_nonneg() + sdp.num_free();

  const Vector b_all = sdp.rhs();
  const Matrix A_all = dense_rows(sdp, offsets, nvars);
  std::vector<int> kept;
  if (sdp.num_rows() > 0) {
    Vector norms = A_all.rowwise().norm();
    Matrix At(nvars, sdp.num_rows());
    std::vector<int> nonzero;
    for (int j = 0; j < sdp.num_rows(); ++j) {
      if (norms(j) > 0.0) {
        nonzero.push_back(j);
      } else if (std::abs(b_all(j)) > 0.0) {
        cp.inconsistent = true;
        warnings.push_back("row " + std::to_string(j) + " has no terms but nonzero rhs");
      }
    }
    At.resize(nvars, static_cast<Eigen::Index>(nonzero.size()));
    for (std::size_t c = 0; c < nonzero.size(); ++c) {
      At.col(static_cast<Eigen::Index>(c)) = A_all.row(nonzero[c]).transpose() / norms(nonzero[c]);
    }
    if (!nonzero.empty()) {
      Eigen::ColPivHouseholderQR<Matrix> qr(At);
      qr.setThreshold(1e-9);
      const auto rank = qr.rank();
      std::vector<int> chosen;
      for (Eigen::Index c = 0; c < rank; ++c) chosen.push_back(nonzero[static_cast<std::size_t>(qr.colsPermutation().indices()(c))]);
      std::sort(chosen.begin(), chosen.end());
      kept = chosen;
      if (static_cast<std::size_t>(rank) < nonzero.size()) {
        Matrix K(nvars, rank);
        Vector bk(rank);
        for (Eigen::Index c = 0; c < rank; ++c) {
          K.col(c) = A_all.row(kept[static_cast<std::size_t>(c)]).transpose();
          bk(c) = b_all(kept[static_cast<std::size_t>(c)]);
        }
        Eigen::ColPivHouseholderQR<Matrix> kqr(K);
        for (int j : nonzero) {
          if (std::binary_search(kept.begin(), kept.end(), j)) continue;
          const Vector coef = kqr.solve(A_all.row(j).transpose());
          const double implied = bk.dot(coef);
          const double scale = 1.0 + std::abs(b_all(j)) + bk.cwiseAbs().dot(coef.cwiseAbs());
          if (std::abs(implied - b_all(j)) > 1e-8 * scale) {
            cp.inconsistent = true;
            warnings.push_back("dependent row " + std::to_string(j) + " is inconsistent with the others");
          } else {
            warnings.push_back("dependent row " + std::to_string(j) + " removed");
          }
        }
      }
    }
  }

  cp.kept = kept;
  cp.p = static_cast<int>(kept.size());
  cp.b.resize(cp.p);
  cp.AL = Matrix::Zero(cp.p, sdp.num_nonneg());
  cp.AF = Matrix::Zero(cp.p, sdp.num_free());
  cp.blocks.resize(cp.dims.size());
  std::vector<std::vector<int>> slot(cp.dims.size(), std::vector<int>(static_cast<std::size_t>(cp.p), -1));
  for (int jj = 0; jj < cp.p; ++jj) {
    const auto& r = sdp.row(kept[static_cast<std::size_t>(jj)]);
    cp.b(jj) = r.rhs;
    for (const auto& [b, a] : r.psd) {
      auto& br = cp.blocks[static_cast<std::size_t>(b)];
      int& s = slot[static_cast<std::size_t>(b)][static_cast<std::size_t>(jj)];
      if (s < 0) {
        s = static_cast<int>(br.rows.size());
        br.rows.push_back(jj);
        br.mats.push_back(a.matrix());
      } else {
        br.mats[static_cast<std::size_t>(s)] += a.matrix();
      }
    }
    for (const auto& [i, a] : r.nonneg) cp.AL(jj, i) += a;
    for (const auto& [i, a] : r.free) cp.AF(jj, i) += a;
  }

  // Free variables absent from every row: zero cost makes them irrelevant,
  // nonzero cost makes the dual equation c_f = 0 unsatisfiable.
  cp.original_free = sdp.num_free();
  {
    std::vector<int> keep;
    for (int i = 0; i < sdp.num_free(); ++i) {
      if (cp.p > 0 && cp.AF.col(i).cwiseAbs().maxCoeff() > 0.0) {
        keep.push_back(i);
      } else if (cp.cF(i) != 0.0) {
        cp.free_unbounded = true;
        warnings.push_back("free variable " + std::to_string(i) + " has nonzero cost but appears in no row");
      }
    }
    if (static_cast<int>(keep.size()) < sdp.num_free()) {
      Matrix af(cp.p, static_cast<Eigen::Index>(keep.size()));
      Vector cf(static_cast<Eigen::Index>(keep.size()));
      for (std::size_t k = 0; k < keep.size(); ++k) {
        af.col(static_cast<Eigen::Index>(k)) = cp.AF.col(keep[k]);
        cf(static_cast<Eigen::Index>(k)) = cp.cF(keep[k]);
      }
      cp.AF = std::move(af);
      cp.cF = std::move(cf);
    }
    cp.free_index = std::move(keep);
  }

  double a_sq = cp.AL.squaredNorm() + cp.AF.squaredNorm();
  for (const auto& br : cp.blocks) {
    for (const auto& m : br.mats) a_sq += m.squaredNorm();
  }
  double c_sq = cp.cL.squaredNorm() + cp.cF.squaredNorm();
  for (const auto& c : cp.C) c_sq += c.squaredNorm();
  cp.b_norm = cp.b.norm();
  cp.c_norm = std::sqrt(c_sq);
  cp.data_norm = std::sqrt(a_sq + c_sq + cp.b_norm * cp.b_norm);
  return cp;
}

/// Cone part of a primal or dual iterate.
struct ConeVec {
  std::vector<Matrix> blk;
  Vector lp;
};

struct Direction {
  std::vector<Matrix> dX, dS;
  Vector dxL, dsL, dxF, dy;
  double dtau = 0.0;
  double dkappa = 0.0;
  // scaled
  std::vector<Matrix> dXs, dSs;
  Vector dxLs, dsLs;
};

Matrix sym(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// Max alpha in (0, inf] keeping lambda + alpha*d PSD, where lambda is diagonal > 0.
double max_step_diag(const Vector& lambda, const Matrix& d) {
  const Vector isq = lambda.cwiseSqrt().cwiseInverse();
  const Matrix t = isq.asDiagonal() * d * isq.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(t), Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues()(0);
  return lmin < 0.0 ? -1.0 / lmin : kInf;
}

class KktSolver {
 public:
  // Factors D (K0 + reg) D, where D equilibrates the Schur block to unit
  // diagonal and the free-variable rows to unit max entry.
  bool factor(const Matrix& M, const Matrix& AF, double reg) {
    p_ = static_cast<int>(M.rows());
    nf_ = static_cast<int>(AF.cols());
    const int n = p_ + nf_;
    Matrix K0 = Matrix::Zero(n, n);
    K0.topLeftCorner(p_, p_) = M;
    K0.topRightCorner(p_, nf_) = AF;
    K0.bottomLeftCorner(nf_, p_) = AF.transpose();
    D_ = Vector::Ones(n);
    double mdiag = 0.0;
    if (p_ > 0) mdiag = M.diagonal().cwiseAbs().maxCoeff();
    const double floor = std::max(mdiag, 1.0) * 1e-14;
    for (int i = 0; i < p_; ++i) D_(i) = 1.0 / std::sqrt(std::max(std::abs(M(i, i)), floor));
    for (int f = 0; f < nf_; ++f) {
      const double mx = (D_.head(p_).asDiagonal() * AF.col(f)).cwiseAbs().maxCoeff();
      if (mx > 0.0) D_(p_ + f) = 1.0 / mx;
    }
    Ks_ = D_.asDiagonal() * K0 * D_.asDiagonal();
    Matrix K = Ks_;
    double diag = 1.0;
    if (p_ > 0) diag = std::max(diag, K.diagonal().head(p_).cwiseAbs().maxCoeff());
    const double delta = reg * diag;
    for (int i = 0; i < p_; ++i) K(i, i) += delta;
    for (int i = p_; i < n; ++i) K(i, i) -= delta;
    use_lu_ = false;
    if (nf_ == 0) {
      llt_.compute(K);
      if (llt_.info() == Eigen::Success) {
        use_llt_ = true;
        return true;
      }
    }
    use_llt_ = false;
    ldlt_.compute(K);
    if (ldlt_.info() == Eigen::Success && ldlt_.vectorD().allFinite() && (ldlt_.vectorD().array() != 0.0).all()) {
      return true;
    }
    lu_.compute(K);
    use_lu_ = true;
    return std::isfinite(lu_.determinant()) && lu_.determinant() != 0.0;
  }

  /// Solves K0 [dy; dxf] = [r1; r2] with iterative refinement. Returns the
  /// relative residual of the equilibrated system.
  double solve(const Vector& r1, const Vector& r2, Vector& dy, Vector& dxf) const {
    Vector rhs(p_ + nf_);
    rhs << r1, r2;
    rhs = D_.cwiseProduct(rhs);
    Vector sol = apply_inverse(rhs);
    for (int it = 0; it < 3; ++it) {
      const Vector res = rhs - Ks_ * sol;
      sol += apply_inverse(res);
    }
    const double rel = (rhs - Ks_ * sol).norm() / (1.0 + rhs.norm());
    sol = D_.cwiseProduct(sol);
    dy = sol.head(p_);
    dxf = sol.tail(nf_);
    return rel;
  }

 private:
  Vector apply_inverse(const Vector& r) const {
    if (use_llt_) return llt_.solve(r);
    if (use_lu_) return lu_.solve(r);
    return ldlt_.solve(r);
  }

  int p_ = 0;
  int nf_ = 0;
  Matrix Ks_;
  Vector D_;
  Eigen::LLT<Matrix> llt_;
  Eigen::LDLT<Matrix> ldlt_;
  Eigen::PartialPivLU<Matrix> lu_;
  bool use_llt_ = false;
  bool use_lu_ = false;
};

class InteriorPoint {
 public:
  InteriorPoint(const Compiled& cp, const SolverOptions& opts) : cp_(cp), opts_(opts) {}

  SdpSolution run();

 private:
  // operators
  Vector A_apply(const std::vector<Matrix>& X, const Vector& xL, const Vector& xF) const;
  void AT_apply(const Vector& y, std::vector<Matrix>& out_blk, Vector& out_L, Vector& out_F) const;
  double c_dot(const std::vector<Matrix>& X, const Vector& xL, const Vector& xF) const;

  void init();
  void residuals();
  bool build_schur(double reg);
  bool solve_system_one();
  bool direction(double eta, const std::vector<Matrix>& D, const Vector& dL, double r_tau, Direction& d);
  double step_length(const Direction& d) const;
  bool update(const Direction& d, double alpha);
  bool rescale_from_iterates();
  void fill_solution(SdpSolution& sol, SolveStatus st) const;

  const Compiled& cp_;
  const SolverOptions& opts_;

  std::vector<Matrix> X_, S_, R_, Rinv_;
  std::vector<Vector> lam_;
  Vector xL_, sL_, xF_, y_;
  double tau_ = 1.0;
  double kappa_ = 1.0;

  // residuals
  Vector rp_, rdL_, rdF_;
  std::vector<Matrix> rdK_;
  double Fg_ = 0.0;

  // Newton system data
  std::vector<Matrix> G_;  // R R'
  Vector hL_, rL2_, lamL_;
  Matrix M_;
  KktSolver kkt_;
  Vector dy1_, dxF1_, dxL1_;
  std::vector<Matrix> dX1_;
  double den_ = 1.0;

  struct Snapshot {
    std::vector<Matrix> X, S, R, Rinv;
    std::vector<Vector> lam;
    Vector xL, sL, xF, y;
    double tau = 1.0;
    double kappa = 1.0;
  };
  Snapshot save() const { return {X_, S_, R_, Rinv_, lam_, xL_, sL_, xF_, y_, tau_, kappa_}; }
  void restore(const Snapshot& s) {
    X_ = s.X;
    S_ = s.S;
    R_ = s.R;
    Rinv_ = s.Rinv;
    lam_ = s.lam;
    xL_ = s.xL;
    sL_ = s.sL;
    xF_ = s.xF;
    y_ = s.y;
    tau_ = s.tau;
    kappa_ = s.kappa;
  }
};

void InteriorPoint::init() {
  const int nb = cp_.nb();
  X_.clear();
  S_.clear();
  R_.clear();
  Rinv_.clear();
  lam_.clear();
  for (int b = 0; b < nb; ++b) {
    const int k = cp_.dims[static_cast<std::size_t>(b)];
    X_.push_back(Matrix::Identity(k, k));
    S_.push_back(Matrix::Identity(k, k));
    R_.push_back(Matrix::Identity(k, k));
    Rinv_.push_back(Matrix::Identity(k, k));
    lam_.push_back(Vector::Ones(k));
  }
  xL_ = Vector::Ones(cp_.nL());
  sL_ = Vector::Ones(cp_.nL());
  xF_ = Vector::Zero(cp_.nF());
  y_ = Vector::Zero(cp_.p);
  tau_ = 1.0;
  kappa_ = 1.0;
}

Vector InteriorPoint::A_apply(const std::vector<Matrix>& X, const Vector& xL, const Vector& xF) const {
  Vector out = cp_.AL * xL + cp_.AF * xF;
  for (int b = 0; b < cp_.nb(); ++b) {
    const auto& br = cp_.blocks[static_cast<std::size_t>(b)];
    for (std::size_t t = 0; t < br.rows.size(); ++t) {
      out(br.rows[t]) += br.mats[t].cwiseProduct(X[static_cast<std::size_t>(b)]).sum();
    }
  }
  return out;
}

void InteriorPoint::AT_apply(const Vector& y, std::vector<Matrix>& out_blk, Vector& out_L, Vector& out_F) const {
  out_blk.resize(static_cast<std::size_t>(cp_.nb()));
  for (int b = 0; b < cp_.nb(); ++b) {
    const int k = cp_.dims[static_cast<std::size_t>(b)];
    Matrix acc = Matrix::Zero(k, k);
    const auto& br = cp_.blocks[static_cast<std::size_t>(b)];
    for (std::size_t t = 0; t < br.rows.size(); ++t) acc += y(br.rows[t]) * br.mats[t];
    out_blk[static_cast<std::size_t>(b)] = std::move(acc);
  }
  out_L = cp_.AL.transpose() * y;
  out_F = cp_.AF.transpose() * y;
}

double InteriorPoint::c_dot(const std::vector<Matrix>& X, const Vector& xL, const Vector& xF) const {
  double v = cp_.cL.dot(xL) + cp_.cF.dot(xF);
  for (int b = 0; b < cp_.nb(); ++b) v += cp_.C[static_cast<std::size_t>(b)].cwiseProduct(X[static_cast<std::size_t>(b)]).sum();
  return v;
}

void InteriorPoint::residuals() {
  rp_ = tau_ * cp_.b - A_apply(X_, xL_, xF_);
  std::vector<Matrix> aty;
  Vector atyL, atyF;
  AT_apply(y_, aty, atyL, atyF);
  rdK_.resize(static_cast<std::size_t>(cp_.nb()));
  for (int b = 0; b < cp_.nb(); ++b) {
    const auto bi = static_cast<std::size_t>(b);
    rdK_[bi] = tau_ * cp_.C[bi] - aty[bi] - S_[bi];
  }
  rdL_ = tau_ * cp_.cL - atyL - sL_;
  rdF_ = tau_ * cp_.cF - atyF;
  Fg_ = cp_.b.dot(y_) - c_dot(X_, xL_, xF_) - kappa_;
}

bool InteriorPoint::build_schur(double reg) {
  const int p = cp_.p;
  M_ = Matrix::Zero(p, p);
  G_.resize(static_cast<std::size_t>(cp_.nb()));
  for (int b = 0; b < cp_.nb(); ++b) {
    const auto bi = static_cast<std::size_t>(b);
    G_[bi] = R_[bi] * R_[bi].transpose();
    const auto& br = cp_.blocks[bi];
    const std::size_t nr = br.rows.size();
    std::vector<Matrix> P(nr);
    for (std::size_t t = 0; t < nr; ++t) P[t] = G_[bi] * br.mats[t] * G_[bi];
    for (std::size_t t = 0; t < nr; ++t) {
      for (std::size_t u = t; u < nr; ++u) {
        const double v = br.mats[u].cwiseProduct(P[t]).sum();
        M_(br.rows[t], br.rows[u]) += v;
        if (u != t) M_(br.rows[u], br.rows[t]) += v;
      }
    }
  }
  hL_ = xL_.cwiseQuotient(sL_);
  rL2_ = hL_.cwiseSqrt();
  lamL_ = xL_.cwiseProduct(sL_).cwiseSqrt();
  if (cp_.nL() > 0) M_.noalias() += cp_.AL * hL_.asDiagonal() * cp_.AL.transpose();
  if (!M_.allFinite()) return false;
  return kkt_.factor(M_, cp_.AF, reg);
}

bool InteriorPoint::solve_system_one() {
  // Coefficient of dtau: rhs b + A(H^-1 c), c_F.
  std::vector<Matrix> GCG(static_cast<std::size_t>(cp_.nb()));
  for (int b = 0; b < cp_.nb(); ++b) {
    const auto bi = static_cast<std::size_t>(b);
    GCG[bi] = G_[bi] * cp_.C[bi] * G_[bi];
  }
  const Vector hcL = hL_.cwiseProduct(cp_.cL);
  const Vector r1 = cp_.b + A_apply(GCG, hcL, Vector::Zero(cp_.nF()));
  const double rel = kkt_.solve(r1, cp_.cF, dy1_, dxF1_);
  if (!std::isfinite(rel) || rel > 1e-6) return false;
  std::vector<Matrix> aty;
  Vector atyL, atyF;
  AT_apply(dy1_, aty, atyL, atyF);
  dX1_.resize(static_cast<std::size_t>(cp_.nb()));
  for (int b = 0; b < cp_.nb(); ++b) {
    const auto bi = static_cast<std::size_t>(b);
    dX1_[bi] = G_[bi] * (aty[bi] - cp_.C[bi]) * G_[bi];
  }
  dxL1_ = hL_.cwiseProduct(atyL - cp_.cL);
  den_ = cp_.b.dot(dy1_) - c_dot(dX1_, dxL1_, dxF1_) + kappa_ / tau_;
  return std::isfinite(den_) && std::abs(den_) > 0.0;
}

bool InteriorPoint::direction(double eta, const std::vector<Matrix>& D, const Vector& dL, double r_tau, Direction& d) {
  const int nb = cp_.nb();
  std::vector<Matrix> Q(static_cast<std::size_t>(nb));
  for (int b = 0; b < nb; ++b) {
    const auto bi = static_cast<std::size_t>(b);
    Q[bi] = R_[bi] * D[bi] * R_[bi].transpose() - eta * (G_[bi] * rdK_[bi] * G_[bi]);
  }
  const Vector qL = rL2_.cwiseProduct(dL) - eta * hL_.cwiseProduct(rdL_);
  const Vector r1 = eta * rp_ - A_apply(Q, qL, Vector::Zero(cp_.nF()));
  const Vector r2 = eta * rdF_;
  Vector dy0, dxF0;
  const double rel = kkt_.solve(r1, r2, dy0, dxF0);
  if (!std::isfinite(rel) || rel > 1e-6) return false;

  std::vector<Matrix> aty;
  Vector atyL, atyF;
  AT_apply(dy0, aty, atyL, atyF);
  std::vector<Matrix> dX0(static_cast<std::size_t>(nb));
  for (int b = 0; b < nb; ++b) {
    const auto bi = static_cast<std::size_t>(b);
    dX0[bi] = Q[bi] + G_[bi] * aty[bi] * G_[bi];
  }
  const Vector dxL0 = qL + hL_.cwiseProduct(atyL);

  const double num = -eta * Fg_ - cp_.b.dot(dy0) + c_dot(dX0, dxL0, dxF0) + r_tau / tau_;
  d.dtau = num / den_;
  d.dy = dy0 + d.dtau * dy1_;
  d.dxF = dxF0 + d.dtau * dxF1_;
  d.dxL = dxL0 + d.dtau * dxL1_;
  d.dX.resize(static_cast<std::size_t>(nb));
  for (int b = 0; b < nb; ++b) {
    const auto bi = static_cast<std::size_t>(b);
    d.dX[bi] = sym(dX0[bi] + d.dtau * dX1_[bi]);
  }
  AT_apply(d.dy, aty, atyL, atyF);
  d.dS.resize(static_cast<std::size_t>(nb));
  for (int b = 0; b < nb; ++b) {
    const auto bi = static_cast<std::size_t>(b);
    d.dS[bi] = sym(-aty[bi] + d.dtau * cp_.C[bi] + eta * rdK_[bi]);
  }
  d.dsL = -atyL + d.dtau * cp_.cL + eta * rdL_;
  d.dkappa = (r_tau - kappa_ * d.dtau) / tau_;

  d.dXs.resize(static_cast<std::size_t>(nb));
  d.dSs.resize(static_cast<std::size_t>(nb));
  for (int b = 0; b < nb; ++b) {
    const auto bi = static_cast<std::size_t>(b);
    d.dXs[bi] = sym(Rinv_[bi] * d.dX[bi] * Rinv_[bi].transpose());
    d.dSs[bi] = sym(R_[bi].transpose() * d.dS[bi] * R_[bi]);
  }
  d.dxLs = d.dxL.cwiseQuotient(rL2_);
  d.dsLs = d.dsL.cwiseProduct(rL2_);
  return d.dy.allFinite() && std::isfinite(d.dtau);
}

double InteriorPoint::step_length(const Direction& d) const {
  double amax = kInf;
  for (int b = 0; b < cp_.nb(); ++b) {
    const auto bi = static_cast<std::size_t>(b);
    amax = std::min(amax, max_step_diag(lam_[bi], d.dXs[bi]));
    amax = std::min(amax, max_step_diag(lam_[bi], d.dSs[bi]));
  }
  for (int i = 0; i < cp_.nL(); ++i) {
    if (d.dxL(i) < 0.0) amax = std::min(amax, -xL_(i) / d.dxL(i));
    if (d.dsL(i) < 0.0) amax = std::min(amax, -sL_(i) / d.dsL(i));
  }
  if (d.dtau < 0.0) amax = std::min(amax, -tau_ / d.dtau);
  if (d.dkappa < 0.0) amax = std::min(amax, -kappa_ / d.dkappa);
  return amax;
}

bool InteriorPoint::update(const Direction& d, double alpha) {
  bool scaled_ok = true;
  for (int b = 0; b < cp_.nb(); ++b) {
    const auto bi = static_cast<std::size_t>(b);
    // New NT scaling from the scaled iterates, which stay well conditioned.
    // X and S are then recovered from (R, lambda) so they remain consistent.
    const Matrix xs = sym(Matrix(lam_[bi].asDiagonal()) + alpha * d.dXs[bi]);
    const Matrix ss = sym(Matrix(lam_[bi].asDiagonal()) + alpha * d.dSs[bi]);
    Eigen::LLT<Matrix> l1(xs), l2(ss);
    bool ok = l1.info() == Eigen::Success && l2.info() == Eigen::Success;
    if (ok) {
      const Matrix L1 = l1.matrixL();
      const Matrix L2 = l2.matrixL();
      Eigen::JacobiSVD<Matrix> svd(L2.transpose() * L1, Eigen::ComputeFullU | Eigen::ComputeFullV);
      const Vector lam = svd.singularValues();
      ok = lam.minCoeff() > 0.0 && lam.allFinite();
      if (ok) {
        const Vector isq = lam.cwiseSqrt().cwiseInverse();
        R_[bi] = R_[bi] * L1 * svd.matrixV() * isq.asDiagonal();
        Rinv_[bi] = isq.asDiagonal() * svd.matrixU().transpose() * L2.transpose() * Rinv_[bi];
        lam_[bi] = lam;
        X_[bi] = sym(R_[bi] * lam.asDiagonal() * R_[bi].transpose());
        S_[bi] = sym(Rinv_[bi].transpose() * lam.asDiagonal() * Rinv_[bi]);
      }
    }
    if (!ok) {
      X_[bi] = sym(X_[bi] + alpha * d.dX[bi]);
      S_[bi] = sym(S_[bi] + alpha * d.dS[bi]);
      scaled_ok = false;
    }
  }
  xL_ += alpha * d.dxL;
  sL_ += alpha * d.dsL;
  xF_ += alpha * d.dxF;
  y_ += alpha * d.dy;
  tau_ += alpha * d.dtau;
  kappa_ += alpha * d.dkappa;
  const bool positive =
      (cp_.nL() == 0 || (xL_.minCoeff() > 0.0 && sL_.minCoeff() > 0.0)) && tau_ > 0.0 && kappa_ > 0.0;
  return positive && (scaled_ok || rescale_from_iterates());
}

bool InteriorPoint::rescale_from_iterates() {
  for (int b = 0; b < cp_.nb(); ++b) {
    const auto bi = static_cast<std::size_t>(b);
    Eigen::LLT<Matrix> lx(X_[bi]), ls(S_[bi]);
    if (lx.info() != Eigen::Success || ls.info() != Eigen::Success) return false;
    const Matrix Lx = lx.matrixL();
    const Matrix Ls = ls.matrixL();
    Eigen::JacobiSVD<Matrix> svd(Ls.transpose() * Lx, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector lam = svd.singularValues();
    if (!(lam.minCoeff() > 0.0)) return false;
    const Vector isq = lam.cwiseSqrt().cwiseInverse();
    R_[bi] = Lx * svd.matrixV() * isq.asDiagonal();
    Rinv_[bi] = isq.asDiagonal() * svd.matrixU().transpose() * Ls.transpose();
    lam_[bi] = lam;
  }
  return true;
}

struct Metrics {
  double pres = kInf;
  double dres = kInf;
  double pobj = 0.0;
  double dobj = 0.0;
  double gap = kInf;
  double relgap = kInf;
  double pnorm = 0.0;
  double dnorm = 0.0;
};

void InteriorPoint::fill_solution(SdpSolution& sol, SolveStatus st) const {
  sol.status = st;
  const double scale = 1.0 / tau_;
  sol.primal.psd.clear();
  sol.dual_slack.clear();
  for (int b = 0; b < cp_.nb(); ++b) {
    const auto bi = static_cast<std::size_t>(b);
    sol.primal.psd.push_back(SymMatrix::symmetrized(scale * X_[bi]));
    sol.dual_slack.push_back(SymMatrix::symmetrized(scale * S_[bi]));
  }
  sol.primal.nonneg = scale * xL_;
  sol.primal.free = Vector::Zero(cp_.original_free);
  for (int i = 0; i < cp_.nF(); ++i) sol.primal.free(cp_.free_index[static_cast<std::size_t>(i)]) = scale * xF_(i);
  sol.dual_slack_nonneg = scale * sL_;
  sol.dual = Vector::Zero(cp_.original_rows);
  for (int j = 0; j < cp_.p; ++j) sol.dual(cp_.kept[static_cast<std::size_t>(j)]) = scale * y_(j);
}

SdpSolution InteriorPoint::run() {
  SdpSolution sol;
  init();

  const double bscale = 1.0 + cp_.b_norm;
  const double cscale = 1.0 + cp_.c_norm;
  const double div_limit = opts_.divergence_factor * (1.0 + cp_.data_norm);
  Metrics prev;
  std::optional<Snapshot> best;
  double best_merit = kInf;
  int best_it = 0;
  int small_steps = 0;
  std::optional<SolveStatus> final_status;

  auto metrics = [&]() {
    Metrics m;
    m.pres = rp_.norm() / tau_ / bscale;
    double dsq = rdL_.squaredNorm() + rdF_.squaredNorm();
    for (const auto& r : rdK_) dsq += r.squaredNorm();
    m.dres = std::sqrt(dsq) / tau_ / cscale;
    m.pobj = c_dot(X_, xL_, xF_) / tau_;
    m.dobj = cp_.b.dot(y_) / tau_;
    double comp = xL_.dot(sL_);
    double psq = xL_.squaredNorm() + xF_.squaredNorm();
    double ssq = sL_.squaredNorm() + y_.squaredNorm();
    for (int b = 0; b < cp_.nb(); ++b) {
      const auto bi = static_cast<std::size_t>(b);
      comp += X_[bi].cwiseProduct(S_[bi]).sum();
      psq += X_[bi].squaredNorm();
      ssq += S_[bi].squaredNorm();
    }
    m.gap = comp / (tau_ * tau_);
    m.relgap = std::abs(m.pobj - m.dobj) / (1.0 + std::abs(m.pobj));
    m.pnorm = std::sqrt(psq) / tau_;
    m.dnorm = std::sqrt(ssq) / tau_;
    return m;
  };

  auto near_ok = [&](const Metrics& m) {
    const double t = opts_.near_optimal_tol;
    return m.pres <= t && m.dres <= t && m.relgap <= t && m.gap <= t * (1.0 + std::abs(m.pobj));
  };

  // Norm histories: geometric growth of the normalized iterates while the gap
  // closes is the signature of an optimum that is not attained.
  std::vector<double> pnorms, dnorms;
  const double big_norm = kLargeNormFactor * (1.0 + cp_.data_norm);
  auto growing = [&](const std::vector<double>& h) {
    const std::size_t n = h.size();
    return n > kTrendWindow && h[n - 1] > big_norm && h[n - 1] >= kTrendGrowth * h[n - 1 - kTrendWindow];
  };
  bool primal_growing = false;
  bool dual_growing = false;

  int it = 0;
  for (; it <= opts_.max_iter; ++it) {
    residuals();
    const Metrics m = metrics();
    if (opts_.verbose) {
      std::cerr << "it " << it << " pobj " << m.pobj << " dobj " << m.dobj << " gap " << m.gap << " pres " << m.pres
                << " dres " << m.dres << " tau " << tau_ << " kappa " << kappa_ << " |x| " << m.pnorm << " |s| "
                << m.dnorm << '\n';
    }
    sol.iterations = it;
    pnorms.push_back(m.pnorm);
    dnorms.push_back(m.dnorm);
    primal_growing = growing(pnorms);
    dual_growing = growing(dnorms);

    // Optimality.
    if (!primal_growing && !dual_growing && m.pres <= opts_.feas_tol && m.dres <= opts_.feas_tol && m.relgap <= opts_.gap_tol &&
        m.gap <= opts_.gap_tol * (1.0 + std::abs(m.pobj))) {
      final_status = SolveStatus::Optimal;
      break;
    }

    // Infeasibility certificates from the unnormalized iterate.
    {
      const double by = cp_.b.dot(y_);
      const double cx = c_dot(X_, xL_, xF_);
      std::vector<Matrix> aty;
      Vector atyL, atyF;
      AT_apply(y_, aty, atyL, atyF);
      double dsq = (atyL + sL_).squaredNorm() + atyF.squaredNorm();
      for (int b = 0; b < cp_.nb(); ++b) dsq += (aty[static_cast<std::size_t>(b)] + S_[static_cast<std::size_t>(b)]).squaredNorm();
      const double pinf = by > 0.0 ? std::sqrt(dsq) / by : kInf;
      const double dinf = cx < 0.0 ? A_apply(X_, xL_, xF_).norm() / (-cx) : kInf;
      const bool ratio = tau_ < opts_.infeasibility_ratio * kappa_;
      if (pinf <= opts_.feas_tol || (ratio && by > 0.0 && by >= -cx)) {
        final_status = SolveStatus::PrimalInfeasible;
        break;
      }
      if (dinf <= opts_.feas_tol || (ratio && cx < 0.0)) {
        final_status = SolveStatus::DualInfeasible;
        break;
      }
    }

    // Divergence of the normalized iterates while the gap keeps closing.
    if (it > 0 && m.gap <= prev.gap) {
      if (m.pnorm > div_limit) {
        sol.primal_norm_warning = true;
        sol.warnings.push_back("primal iterate norm exceeds " + std::to_string(div_limit) +
                               "; optimum is likely not attained");
        final_status = SolveStatus::DivergingIterates;
        break;
      }
      if (m.dnorm > div_limit) {
        sol.dual_norm_warning = true;
        sol.warnings.push_back("dual iterate norm exceeds " + std::to_string(div_limit) +
                               "; dual optimum is likely not attained");
        final_status = SolveStatus::DivergingIterates;
        break;
      }
    }

    if (it == opts_.max_iter) break;

    // Ill-posed problems drive tau and kappa to zero together; the normalized
    // iterate then loses accuracy, so remember the best one and stop when
    // progress stalls.
    const double merit = std::max({m.pres, m.dres, m.relgap, m.gap / (1.0 + std::abs(m.pobj))});
    if (merit < best_merit) {
      best_merit = merit;
      best = save();
      best_it = it;
    } else if (it - best_it >= kStallIterations) {
      sol.warnings.push_back("no progress for " + std::to_string(kStallIterations) + " iterations");
      final_status = SolveStatus::NumericalFailure;
      break;
    }
    prev = m;

    const double mu = (m.gap * tau_ * tau_ + tau_ * kappa_) / (cp_.nu + 1.0);

    bool ok = build_schur(opts_.static_reg) && solve_system_one();
    if (!ok) ok = build_schur(opts_.retry_reg) && solve_system_one();
    if (!ok) {
      sol.warnings.push_back("KKT factorization failed after regularization retry");
      final_status = SolveStatus::NumericalFailure;
      break;
    }

    // Predictor.
    const int nb = cp_.nb();
    std::vector<Matrix> D(static_cast<std::size_t>(nb));
    for (int b = 0; b < nb; ++b) D[static_cast<std::size_t>(b)] = -Matrix(lam_[static_cast<std::size_t>(b)].asDiagonal());
    Vector dL = -lamL_;
    Direction aff;
    if (!direction(1.0, D, dL, -tau_ * kappa_, aff)) {
      ok = build_schur(opts_.retry_reg) && solve_system_one() && direction(1.0, D, dL, -tau_ * kappa_, aff);
      if (!ok) {
        sol.warnings.push_back("predictor solve failed");
        final_status = SolveStatus::NumericalFailure;
        break;
      }
    }
    const double alpha_aff = std::min(1.0, step_length(aff));
    const double sigma = std::clamp(std::pow(1.0 - alpha_aff, 3), 0.0, 1.0);
    const double target = sigma * mu;

    // Corrector with second-order term.
    for (int b = 0; b < nb; ++b) {
      const auto bi = static_cast<std::size_t>(b);
      const Vector& lam = lam_[bi];
      const int k = static_cast<int>(lam.size());
      const Matrix prod = sym(aff.dXs[bi] * aff.dSs[bi]);
      Matrix rc = -prod;
      for (int i = 0; i < k; ++i) rc(i, i) += target - lam(i) * lam(i);
      Matrix Db(k, k);
      for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) Db(i, j) = 2.0 * rc(i, j) / (lam(i) + lam(j));
      }
      D[bi] = std::move(Db);
    }
    dL = (Vector::Constant(cp_.nL(), target) - lamL_.cwiseProduct(lamL_) - aff.dxLs.cwiseProduct(aff.dsLs))
             .cwiseQuotient(lamL_);
    const double r_tau = target - tau_ * kappa_ - aff.dtau * aff.dkappa;
    Direction dir;
    if (!direction(1.0 - sigma, D, dL, r_tau, dir)) {
      sol.warnings.push_back("corrector solve failed");
      final_status = SolveStatus::NumericalFailure;
      break;
    }
    const double amax = step_length(dir);
    const double alpha = std::min(1.0, opts_.step_fraction * amax);
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
      final_status = SolveStatus::NumericalFailure;
      sol.warnings.push_back("zero step length");
      break;
    }
    small_steps = alpha < 1e-8 ? small_steps + 1 : 0;
    if (small_steps >= 3) {
      sol.warnings.push_back("stalled: step lengths below 1e-8");
      final_status = SolveStatus::NumericalFailure;
      break;
    }
    if (!update(dir, alpha)) {
      if (!rescale_from_iterates()) {
        sol.warnings.push_back("lost positive definiteness of iterates");
        final_status = SolveStatus::NumericalFailure;
        break;
      }
    }
  }

  SolveStatus st = final_status.value_or(SolveStatus::IterLimit);
  if ((st == SolveStatus::IterLimit || st == SolveStatus::NumericalFailure) && best) {
    residuals();
    const Metrics last = metrics();
    const double last_merit =
        std::max({last.pres, last.dres, last.relgap, last.gap / (1.0 + std::abs(last.pobj))});
    if (!(last_merit <= best_merit)) restore(*best);
  }
  residuals();
  Metrics m = metrics();
  if ((st == SolveStatus::IterLimit || st == SolveStatus::NumericalFailure) && near_ok(m)) {
    st = SolveStatus::NearOptimal;
  }
  fill_solution(sol, st);
  sol.pobj = m.pobj;
  sol.dobj = m.dobj;
  sol.gap = m.gap;
  sol.primal_residual = m.pres;
  sol.dual_residual = m.dres;
  sol.primal_norm = m.pnorm;
  sol.dual_norm = m.dnorm;
  if (st == SolveStatus::PrimalInfeasible) {
    // Certificate y with b'y = 1.
    const double by = cp_.b.dot(y_);
    sol.dual = Vector::Zero(cp_.original_rows);
    if (by > 0.0) {
      for (int j = 0; j < cp_.p; ++j) sol.dual(cp_.kept[static_cast<std::size_t>(j)]) = y_(j) / by;
    }
    sol.pobj = kInf;
    sol.dobj = kInf;
  } else if (st == SolveStatus::DualInfeasible) {
    sol.pobj = -kInf;
    sol.dobj = -kInf;
  }
  if (st == SolveStatus::NearOptimal && (primal_growing || m.pnorm > big_norm)) {
    sol.primal_norm_warning = true;
    sol.warnings.push_back("primal iterates grow without bound; optimum is likely not attained");
  }
  if (st == SolveStatus::NearOptimal && (dual_growing || m.dnorm > big_norm)) {
    sol.dual_norm_warning = true;
    sol.warnings.push_back("dual iterates grow without bound; dual optimum is likely not attained");
  }
  return sol;
}

}  // namespace

SdpSolution solve(const BlockSdp& sdp, const SolverOptions& opts) {
  sdp.check();
  std::vector<std::string> warnings;
  Compiled cp = compile(sdp, warnings);
  SdpSolution sol;
  if (cp.inconsistent || cp.free_unbounded) {
    sol.status = cp.inconsistent ? SolveStatus::PrimalInfeasible : SolveStatus::DualInfeasible;
    sol.primal = sdp.zero_point();
    sol.dual = Vector::Zero(sdp.num_rows());
    for (int k : sdp.psd_dims()) sol.dual_slack.push_back(SymMatrix::zero(k));
    sol.dual_slack_nonneg = Vector::Zero(sdp.num_nonneg());
    sol.pobj = cp.inconsistent ? kInf : -kInf;
    sol.dobj = sol.pobj;
    sol.warnings = std::move(warnings);
    return sol;
  }
  InteriorPoint ipm(cp, opts);
  sol = ipm.run();
  sol.dropped_rows = cp.original_rows - cp.p;
  sol.warnings.insert(sol.warnings.begin(), warnings.begin(), warnings.end());
  return sol;
}

}  // namespace stosdp
