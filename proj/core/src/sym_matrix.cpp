#include "stosdp/sym_matrix.hpp"

#include "stosdp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace stosdp {

SymMatrix::SymMatrix(Matrix m) {
  if (m.rows() < 1 || m.rows() != m.cols()) {
    throw DimensionError("SymMatrix needs a square matrix of dimension >= 1, got " +
                         std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (!(asym <= kSymmetryTol * scale)) {
    throw std::invalid_argument("SymMatrix input is not symmetric (max |a_ij - a_ji| = " +
                                std::to_string(asym) + ")");
  }
  if (asym > 0.0) {
    m_ = 0.5 * (m + m.transpose());
    symmetrized_ = true;
  } else {
    m_ = std::move(m);
  }
}

SymMatrix SymMatrix::symmetrized(const Matrix& m) {
  if (m.rows() < 1 || m.rows() != m.cols()) {
    throw DimensionError("SymMatrix::symmetrized needs a square matrix");
  }
  return SymMatrix(Matrix(0.5 * (m + m.transpose())), Trusted{});
}

SymMatrix SymMatrix::identity(int k) {
  if (k < 1) throw DimensionError("SymMatrix dimension must be >= 1");
  return SymMatrix(Matrix::Identity(k, k), Trusted{});
}

SymMatrix SymMatrix::zero(int k) {
  if (k < 1) throw DimensionError("SymMatrix dimension must be >= 1");
  return SymMatrix(Matrix::Zero(k, k), Trusted{});
}

SymMatrix SymMatrix::diagonal(std::span<const double> d) {
  if (d.empty()) throw DimensionError("SymMatrix dimension must be >= 1");
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(d.size()), static_cast<Eigen::Index>(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = d[i];
  return SymMatrix(std::move(m), Trusted{});
}

SymMatrix SymMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const auto k = static_cast<Eigen::Index>(rows.size());
  Matrix m(k, k);
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    if (static_cast<Eigen::Index>(row.size()) != k) throw DimensionError("from_rows: ragged input");
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return SymMatrix(std::move(m));
}

SymMatrix SymMatrix::unit(int k, int i, int j) {
  if (i < 0 || j < 0 || i >= k || j >= k) throw DimensionError("unit: index out of range");
  Matrix m = Matrix::Zero(k, k);
  m(i, j) = 1.0;
  m(j, i) = 1.0;
  return SymMatrix(std::move(m), Trusted{});
}

double SymMatrix::dot(const SymMatrix& other) const {
  if (dim() != other.dim()) {
    throw DimensionError("Frobenius pairing of " + std::to_string(dim()) + "x" + std::to_string(dim()) +
                         " with " + std::to_string(other.dim()) + "x" + std::to_string(other.dim()));
  }
  return m_.cwiseProduct(other.m_).sum();
}

double SymMatrix::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m_, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

SymMatrix& SymMatrix::operator+=(const SymMatrix& rhs) {
  if (dim() != rhs.dim()) throw DimensionError("SymMatrix sum: dimension mismatch");
  m_ += rhs.m_;
  return *this;
}

SymMatrix& SymMatrix::operator-=(const SymMatrix& rhs) {
  if (dim() != rhs.dim()) throw DimensionError("SymMatrix difference: dimension mismatch");
  m_ -= rhs.m_;
  return *this;
}

SymMatrix& SymMatrix::operator*=(double a) {
  m_ *= a;
  return *this;
}

MatrixTuple::MatrixTuple(std::vector<SymMatrix> blocks) : blocks_(std::move(blocks)) {
  if (blocks_.empty()) throw DimensionError("MatrixTuple needs at least one block");
  const int k = blocks_.front().dim();
  for (const auto& b : blocks_) {
    if (b.dim() != k) throw DimensionError("MatrixTuple blocks must share one dimension");
  }
}

double MatrixTuple::norm() const {
  double sq = 0.0;
  for (const auto& b : blocks_) sq += b.matrix().squaredNorm();
  return std::sqrt(sq);
}

Vector frobenius_pair(const MatrixTuple& a, const SymMatrix& x) {
  if (a.dim() != x.dim()) {
    throw DimensionError("frobenius_pair: tuple blocks are " + std::to_string(a.dim()) + "x" +
                         std::to_string(a.dim()) + " but x is " + std::to_string(x.dim()) + "x" +
                         std::to_string(x.dim()));
  }
  Vector out(a.count());
  for (int j = 0; j < a.count(); ++j) out(j) = a[j].dot(x);
  return out;
}

double frobenius_norm(const SymMatrix& x) { return std::sqrt(x.dot(x)); }

SymMatrix adjoint_apply(const MatrixTuple& a, const Vector& u) {
  if (u.size() != a.count()) throw DimensionError("adjoint_apply: vector length differs from tuple count");
  SymMatrix out = SymMatrix::zero(a.dim());
  for (int j = 0; j < a.count(); ++j) out += u(j) * a[j];
  return out;
}

}  // namespace stosdp
