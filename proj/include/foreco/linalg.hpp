#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "foreco/error.hpp"

namespace foreco {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using IndexList = std::vector<Index>;

namespace linalg {

inline bool all_finite(const Eigen::Ref<const Matrix>& m) { return m.allFinite(); }

inline Matrix kron(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Matrix symmetrize(const Eigen::Ref<const Matrix>& m) {
  return 0.5 * (m + m.transpose());
}

inline double max_abs(const Eigen::Ref<const Matrix>& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline double min_eigenvalue(const Eigen::Ref<const Matrix>& m) {
  if (m.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline Matrix select_rows(const Eigen::Ref<const Matrix>& m, const IndexList& rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

inline Matrix select_cols(const Eigen::Ref<const Matrix>& m, const IndexList& cols) {
  Matrix out(m.rows(), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Index>(j)) = m.col(cols[j]);
  return out;
}

inline Matrix select(const Eigen::Ref<const Matrix>& m, const IndexList& rows, const IndexList& cols) {
  Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      out(static_cast<Index>(i), static_cast<Index>(j)) = m(rows[i], cols[j]);
  return out;
}

inline Vector select(const Eigen::Ref<const Vector>& v, const IndexList& idx) {
  Vector out(static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Index>(i)) = v(idx[i]);
  return out;
}

/// Indices in [0, n) not contained in the sorted list `taken`.
inline IndexList complement(Index n, const IndexList& taken) {
  std::vector<bool> mark(static_cast<std::size_t>(n), false);
  for (Index i : taken) mark[static_cast<std::size_t>(i)] = true;
  IndexList out;
  for (Index i = 0; i < n; ++i)
    if (!mark[static_cast<std::size_t>(i)]) out.push_back(i);
  return out;
}

struct Rref {
  Matrix reduced;      // rank × cols, pivot columns form an identity
  IndexList pivots;    // pivot column of each reduced row
  IndexList free;      // remaining columns among the first `pivot_limit`
  Index rank = 0;
  bool inconsistent = false;  // a zero row with nonzero trailing part
};

/// Reduced row echelon form with partial pivoting.
///
/// Pivots are only searched in the first `pivot_limit` columns (all columns
/// when negative); trailing columns are carried along, which is how an
/// augmented system [C | r] is reduced. Entries below `tol` times the largest
/// absolute entry are treated as zero.
inline Rref rref(Matrix m, double tol = 1e-10, Index pivot_limit = -1) {
  const Index rows = m.rows();
  const Index cols = m.cols();
  const Index limit = pivot_limit < 0 ? cols : pivot_limit;
  const double scale = std::max(1.0, max_abs(m));
  const double eps = tol * scale;

  Rref out;
  Index r = 0;
  for (Index c = 0; c < limit && r < rows; ++c) {
    Index best = r;
    double best_val = std::abs(m(r, c));
    for (Index i = r + 1; i < rows; ++i) {
      if (std::abs(m(i, c)) > best_val) {
        best_val = std::abs(m(i, c));
        best = i;
      }
    }
    if (best_val <= eps) {
      m.col(c).tail(rows - r).setZero();
      continue;
    }
    if (best != r) m.row(best).swap(m.row(r));
    const double piv = m(r, c);
    m.row(r) /= piv;
    m(r, c) = 1.0;
    for (Index i = 0; i < rows; ++i) {
      if (i == r) continue;
      const double f = m(i, c);
      if (f != 0.0) {
        m.row(i) -= f * m.row(r);
        m(i, c) = 0.0;
      }
    }
    for (Index j = 0; j < cols; ++j)
      if (std::abs(m(r, j)) <= eps) m(r, j) = 0.0;
    out.pivots.push_back(c);
    ++r;
  }
  out.rank = r;
  for (Index i = r; i < rows; ++i) {
    if (limit < cols && m.row(i).tail(cols - limit).cwiseAbs().maxCoeff() > eps) out.inconsistent = true;
  }
  out.reduced = m.topRows(r);
  out.free = complement(limit, out.pivots);
  return out;
}

inline Index rank(const Eigen::Ref<const Matrix>& m, double tol = 1e-10) {
  if (m.size() == 0) return 0;
  Eigen::ColPivHouseholderQR<Matrix> qr(m);
  qr.setThreshold(tol);
  return qr.rank();
}

/// Factorization of a symmetric positive definite matrix.
///
/// Uses a pivoted LDLᵀ; the matrix is rejected when a diagonal pivot falls
/// below 1e-12 of the largest one. No inverse is ever formed.
class SpdSolver {
 public:
  SpdSolver() = default;
  explicit SpdSolver(const Eigen::Ref<const Matrix>& m, const std::string& what = "matrix") {
    compute(m, what);
  }

  void compute(const Eigen::Ref<const Matrix>& m, const std::string& what = "matrix") {
    ldlt_.compute(m);
    size_ = m.rows();
    if (size_ == 0) return;
    if (ldlt_.info() != Eigen::Success) throw NumericalError(what + ": factorization failed");
    const Vector d = ldlt_.vectorD();
    const double dmax = d.cwiseAbs().maxCoeff();
    const double dmin = d.minCoeff();
    rcond_ = dmax > 0 ? std::max(0.0, dmin) / dmax : 0.0;
    if (!(dmax > 0) || dmin <= 1e-12 * dmax) {
      std::ostringstream os;
      os << what << " is numerically singular (condition estimate " << (rcond_ > 0 ? 1.0 / rcond_ : INFINITY)
         << ", size " << size_ << ")";
      throw NumericalError(os.str());
    }
  }

  template <typename Rhs>
  Matrix solve(const Eigen::MatrixBase<Rhs>& b) const {
    if (size_ == 0) return Matrix(0, b.cols());
    return ldlt_.solve(b);
  }

  double rcond() const noexcept { return rcond_; }
  Index size() const noexcept { return size_; }

 private:
  Eigen::LDLT<Matrix> ldlt_;
  Index size_ = 0;
  double rcond_ = 1.0;
};

/// Lower Cholesky factor Ω = L Lᵀ, used to whiten least-squares objectives.
class Whitener {
 public:
  explicit Whitener(const Eigen::Ref<const Matrix>& omega) : llt_(omega), n_(omega.rows()) {
    if (n_ == 0) return;
    if (llt_.info() != Eigen::Success) throw NumericalError("covariance matrix is not positive definite");
    const Vector d = llt_.matrixL().toDenseMatrix().diagonal();
    if (d.minCoeff() <= 1e-6 * d.maxCoeff())
      throw NumericalError("covariance matrix is numerically singular");
  }

  /// L⁻¹ b
  template <typename Rhs>
  Matrix whiten(const Eigen::MatrixBase<Rhs>& b) const {
    if (n_ == 0) return Matrix(0, b.cols());
    const Matrix bb = b;
    return llt_.matrixL().solve(bb);
  }

  /// L⁻ᵀ b
  template <typename Rhs>
  Matrix whiten_transpose(const Eigen::MatrixBase<Rhs>& b) const {
    if (n_ == 0) return Matrix(0, b.cols());
    const Matrix bb = b;
    return llt_.matrixU().solve(bb);
  }

  /// L b
  template <typename Rhs>
  Matrix color(const Eigen::MatrixBase<Rhs>& b) const {
    if (n_ == 0) return Matrix(0, b.cols());
    const Matrix bb = b;
    return llt_.matrixL() * bb;
  }

 private:
  Eigen::LLT<Matrix> llt_;
  Index n_;
};

}  // namespace linalg
}  // namespace foreco
