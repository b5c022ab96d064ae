#pragma once

#include <Eigen/Dense>

#include <initializer_list>
#include <span>
#include <vector>

namespace stosdp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Dense symmetric k x k real matrix (an element of S^k).
///
/// Symmetry holds exactly once constructed. Inputs whose relative asymmetry
/// is at most kSymmetryTol are averaged with their transpose and remember
/// that fact (see was_symmetrized()); anything worse is rejected. Use
/// symmetrized() to symmetrize arbitrary input on purpose.
class SymMatrix {
 public:
  static constexpr double kSymmetryTol = 1e-10;

  explicit SymMatrix(Matrix m);

  static SymMatrix symmetrized(const Matrix& m);
  static SymMatrix identity(int k);
  static SymMatrix zero(int k);
  static SymMatrix diagonal(std::span<const double> d);
  static SymMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  /// Symmetric unit E_ij + E_ji (or E_ii when i == j).
  static SymMatrix unit(int k, int i, int j);

  int dim() const { return static_cast<int>(m_.rows()); }
  double operator()(int i, int j) const { return m_(i, j); }
  const Matrix& matrix() const { return m_; }
  bool was_symmetrized() const { return symmetrized_; }
  bool is_finite() const { return m_.allFinite(); }

  /// Frobenius pairing x . y = tr(x y).
  double dot(const SymMatrix& other) const;
  double norm() const { return m_.norm(); }
  double trace() const { return m_.trace(); }
  double min_eigenvalue() const;

  SymMatrix& operator+=(const SymMatrix& rhs);
  SymMatrix& operator-=(const SymMatrix& rhs);
  SymMatrix& operator*=(double a);

  friend SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
  friend SymMatrix operator-(SymMatrix a, const SymMatrix& b) { return a -= b; }
  friend SymMatrix operator*(double a, SymMatrix b) { return b *= a; }
  friend SymMatrix operator*(SymMatrix b, double a) { return b *= a; }
  friend SymMatrix operator-(SymMatrix a) { return a *= -1.0; }
  friend bool operator==(const SymMatrix& a, const SymMatrix& b) {
    return a.m_.rows() == b.m_.rows() && a.m_ == b.m_;
  }

 private:
  struct Trusted {};
  SymMatrix(Matrix m, Trusted) : m_(std::move(m)) {}

  Matrix m_;
  bool symmetrized_ = false;
};

/// A tuple (a_1, ..., a_s) of symmetric matrices sharing one dimension.
class MatrixTuple {
 public:
  explicit MatrixTuple(std::vector<SymMatrix> blocks);

  int count() const { return static_cast<int>(blocks_.size()); }
  int dim() const { return blocks_.front().dim(); }
  const SymMatrix& operator[](int j) const { return blocks_[static_cast<std::size_t>(j)]; }
  const std::vector<SymMatrix>& blocks() const { return blocks_; }

  auto begin() const { return blocks_.begin(); }
  auto end() const { return blocks_.end(); }

  /// sqrt(sum_j |a_j|^2); bounds |A . x| <= norm() * |x|.
  double norm() const;

 private:
  std::vector<SymMatrix> blocks_;
};

/// (tr(a_1 x), ..., tr(a_s x)).
Vector frobenius_pair(const MatrixTuple& a, const SymMatrix& x);

/// sqrt(x . x).
double frobenius_norm(const SymMatrix& x);

/// Adjoint of frobenius_pair: sum_j u_j a_j.
SymMatrix adjoint_apply(const MatrixTuple& a, const Vector& u);

}  // namespace stosdp
