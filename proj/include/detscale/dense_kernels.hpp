#pragma once

// In-place factorizations and block updates on single tiles.
//
// Every routine works on row-major Eigen references so it can be applied
// to a Tile view, a dense test matrix or a sub-block alike. Functions are
// templated on the scalar; determinant logs are always accumulated in double.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "detscale/tile.hpp"

namespace detscale {

template <typename Scalar>
using MatrixRef = Eigen::Ref<RowMatrix<Scalar>>;
template <typename Scalar>
using ConstMatrixRef = Eigen::Ref<const RowMatrix<Scalar>>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Row interchanges recorded during a factorization, LAPACK style:
/// at step k row k was exchanged with row swaps[k] (swaps[k] >= k).
struct PivotVector {
  std::vector<Index> swaps;
  int parity = 1;

  Index size() const { return static_cast<Index>(swaps.size()); }

  /// pi such that (P^T A)_q = A_{pi[q]}.
  std::vector<Index> permutation() const {
    std::vector<Index> pi(swaps.size());
    for (std::size_t q = 0; q < pi.size(); ++q) pi[q] = static_cast<Index>(q);
    for (std::size_t k = 0; k < swaps.size(); ++k) {
      std::swap(pi[k], pi[static_cast<std::size_t>(swaps[k])]);
    }
    return pi;
  }

  /// B <- P^T B.
  template <typename Scalar>
  void apply_transpose(MatrixRef<Scalar> B) const {
    if (B.rows() != size()) throw DomainError("pivot vector does not match row count");
    for (Index k = 0; k < size(); ++k) {
      const Index p = swaps[static_cast<std::size_t>(k)];
      if (p != k) B.row(k).swap(B.row(p));
    }
  }
};

struct LuResult {
  PivotVector pivots;
  double logabsdet = 0.0;
  int sign = 1;
  bool singular() const { return sign == 0; }
};

template <typename Scalar>
struct LdlResult {
  PivotVector pivots;
  Vector<Scalar> d;
};

/// Scale-aware pivot threshold: 64 * eps * max|A|.
template <typename Scalar>
double pivot_tolerance(double max_abs) {
  return 64.0 * static_cast<double>(std::numeric_limits<Scalar>::epsilon()) * max_abs;
}

/// A <- P L U with partial pivoting; L unit lower (implicit diagonal) and U
/// share the storage of A.
///
/// An exactly zero pivot column stops the factorization and reports
/// logabsdet = -inf with sign 0; A is then only partially factored.
template <typename Scalar>
LuResult lu_inplace(MatrixRef<Scalar> A) {
  if (A.rows() != A.cols()) throw DomainError("lu_inplace requires a square tile");
  const Index n = A.rows();
  LuResult result;
  result.pivots.swaps.resize(static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k) {
    Index p = k;
    Scalar best = std::abs(A(k, k));
    for (Index i = k + 1; i < n; ++i) {
      const Scalar v = std::abs(A(i, k));
      if (v > best) {
        best = v;
        p = i;
      }
    }
    result.pivots.swaps[static_cast<std::size_t>(k)] = p;
    if (best == Scalar(0)) {
      result.logabsdet = -std::numeric_limits<double>::infinity();
      result.sign = 0;
      result.pivots.swaps.resize(static_cast<std::size_t>(k + 1));
      return result;
    }
    if (p != k) {
      A.row(k).swap(A.row(p));
      result.pivots.parity = -result.pivots.parity;
    }
    const Scalar pivot = A(k, k);
    result.logabsdet += std::log(std::abs(static_cast<double>(pivot)));
    if (pivot < Scalar(0)) result.sign = -result.sign;
    const Index r = n - k - 1;
    if (r > 0) {
      A.col(k).tail(r) /= pivot;
      A.bottomRightCorner(r, r).noalias() -= A.col(k).tail(r) * A.row(k).tail(r);
    }
  }
  result.sign *= result.pivots.parity;
  return result;
}

/// P^T A P = L D L^T with 1x1 symmetric pivoting on the largest diagonal
/// magnitude (lowest index on ties). Only the lower triangle of A is read.
/// On return the strict lower triangle holds L and the diagonal holds d.
///
/// Throws NumericalError when the best remaining pivot is below
/// 64 * eps * max|A|; 2x2 pivots are not attempted, so symmetric matrices
/// with a vanishing diagonal (e.g. [[0,1],[1,0]]) are rejected.
template <typename Scalar>
LdlResult<Scalar> ldl_inplace(MatrixRef<Scalar> A) {
  if (A.rows() != A.cols()) throw DomainError("ldl_inplace requires a square tile");
  const Index n = A.rows();
  const double tol =
      pivot_tolerance<Scalar>(static_cast<double>(A.template triangularView<Eigen::Lower>()
                                                      .toDenseMatrix()
                                                      .cwiseAbs()
                                                      .maxCoeff()));
  LdlResult<Scalar> result;
  result.pivots.swaps.resize(static_cast<std::size_t>(n));
  result.d.resize(n);
  for (Index k = 0; k < n; ++k) {
    Index p = k;
    Scalar best = std::abs(A(k, k));
    for (Index i = k + 1; i < n; ++i) {
      const Scalar v = std::abs(A(i, i));
      if (v > best) {
        best = v;
        p = i;
      }
    }
    result.pivots.swaps[static_cast<std::size_t>(k)] = p;
    if (p != k) {
      // Symmetric interchange of k and p, touching only the lower triangle.
      A.row(k).head(k).swap(A.row(p).head(k));
      std::swap(A(k, k), A(p, p));
      for (Index i = k + 1; i < p; ++i) std::swap(A(i, k), A(p, i));
      if (p + 1 < n) A.col(k).tail(n - p - 1).swap(A.col(p).tail(n - p - 1));
      result.pivots.parity = -result.pivots.parity;
    }
    const Scalar dk = A(k, k);
    if (dk == Scalar(0) || !(std::abs(static_cast<double>(dk)) >= tol) ||
        !std::isfinite(static_cast<double>(dk))) {
      throw NumericalError("LDL pivot " + std::to_string(k) +
                           " below tolerance; 1x1 pivoting cannot handle this indefinite block");
    }
    result.d(k) = dk;
    const Index r = n - k - 1;
    if (r > 0) {
      A.bottomRightCorner(r, r).template selfadjointView<Eigen::Lower>().rankUpdate(
          A.col(k).tail(r), Scalar(-1) / dk);
      A.col(k).tail(r) /= dk;
    }
  }
  return result;
}

namespace detail {

template <typename Scalar>
void cholesky_unblocked(MatrixRef<Scalar> A, Index global_offset) {
  const Index n = A.rows();
  for (Index k = 0; k < n; ++k) {
    const Scalar v = A(k, k);
    if (!(v > Scalar(0)) || !std::isfinite(static_cast<double>(v))) {
      throw NotSpdError("matrix is not positive definite (leading minor " +
                        std::to_string(global_offset + k + 1) + ")");
    }
    const Scalar l = std::sqrt(v);
    A(k, k) = l;
    const Index r = n - k - 1;
    if (r > 0) {
      A.col(k).tail(r) /= l;
      A.bottomRightCorner(r, r).template selfadjointView<Eigen::Lower>().rankUpdate(
          A.col(k).tail(r), Scalar(-1));
    }
  }
}

}  // namespace detail

/// A = L L^T with L in the lower triangle; reads only the lower triangle.
/// Returns diag(L). Throws NotSpdError on a non-positive pivot.
template <typename Scalar>
Vector<Scalar> cholesky_inplace(MatrixRef<Scalar> A) {
  if (A.rows() != A.cols()) throw DomainError("cholesky_inplace requires a square tile");
  constexpr Index kPanel = 64;
  const Index n = A.rows();
  for (Index j = 0; j < n; j += kPanel) {
    const Index jb = std::min(kPanel, n - j);
    detail::cholesky_unblocked<Scalar>(A.block(j, j, jb, jb), j);
    const Index r = n - j - jb;
    if (r > 0) {
      auto panel = A.block(j + jb, j, r, jb);
      A.block(j, j, jb, jb)
          .template triangularView<Eigen::Lower>()
          .transpose()
          .template solveInPlace<Eigen::OnTheRight>(panel);
      A.bottomRightCorner(r, r).template selfadjointView<Eigen::Lower>().rankUpdate(panel,
                                                                                    Scalar(-1));
    }
  }
  return A.diagonal();
}

/// B <- L^{-1} B for lower-triangular L (unit diagonal when `unit_diag`).
template <typename Scalar>
void solve_lower_inplace(ConstMatrixRef<Scalar> L, MatrixRef<Scalar> B, bool unit_diag) {
  if (L.rows() != L.cols() || B.rows() != L.rows()) {
    throw DomainError("solve_lower_inplace: shape mismatch");
  }
  if (unit_diag) {
    L.template triangularView<Eigen::UnitLower>().solveInPlace(B);
    return;
  }
  if ((L.diagonal().array() == Scalar(0)).any()) {
    throw NumericalError("solve_lower_inplace: zero on the diagonal");
  }
  L.template triangularView<Eigen::Lower>().solveInPlace(B);
}

/// C <- C U^{-1} for upper-triangular U.
template <typename Scalar>
void solve_upper_right_inplace(ConstMatrixRef<Scalar> U, MatrixRef<Scalar> C) {
  if (U.rows() != U.cols() || C.cols() != U.rows()) {
    throw DomainError("solve_upper_right_inplace: shape mismatch");
  }
  if ((U.diagonal().array() == Scalar(0)).any()) {
    throw NumericalError("solve_upper_right_inplace: zero on the diagonal");
  }
  U.template triangularView<Eigen::Upper>().template solveInPlace<Eigen::OnTheRight>(C);
}

/// C <- U^{-T} C, the transposed form of solve_upper_right_inplace used when
/// the operand block is held transposed.
template <typename Scalar>
void solve_upper_transposed_inplace(ConstMatrixRef<Scalar> U, MatrixRef<Scalar> C) {
  if (U.rows() != U.cols() || C.rows() != U.rows()) {
    throw DomainError("solve_upper_transposed_inplace: shape mismatch");
  }
  if ((U.diagonal().array() == Scalar(0)).any()) {
    throw NumericalError("solve_upper_transposed_inplace: zero on the diagonal");
  }
  U.transpose().template triangularView<Eigen::Lower>().solveInPlace(C);
}

enum class SchurForm { transposed, plain };

/// S <- S - C^T B (transposed) or S <- S - C B (plain).
template <typename Scalar>
void schur_update(MatrixRef<Scalar> S, ConstMatrixRef<Scalar> C, ConstMatrixRef<Scalar> B,
                  SchurForm form) {
  if (form == SchurForm::transposed) {
    if (C.rows() != B.rows() || S.rows() != C.cols() || S.cols() != B.cols()) {
      throw DomainError("schur_update: shape mismatch");
    }
    S.noalias() -= C.transpose() * B;
  } else {
    if (C.cols() != B.rows() || S.rows() != C.rows() || S.cols() != B.cols()) {
      throw DomainError("schur_update: shape mismatch");
    }
    S.noalias() -= C * B;
  }
}

/// B <- D^{-1} B, D = diag(d).
template <typename Scalar>
void scale_rows_inverse(const Vector<Scalar>& d, MatrixRef<Scalar> B) {
  if (B.rows() != d.size()) throw DomainError("scale_rows_inverse: shape mismatch");
  B.array().colwise() /= d.array();
}

// Tile conveniences; these deduce Scalar.

template <typename Scalar>
LuResult lu_inplace(Tile<Scalar>& A) {
  return lu_inplace<Scalar>(A.view());
}
template <typename Scalar>
LdlResult<Scalar> ldl_inplace(Tile<Scalar>& A) {
  return ldl_inplace<Scalar>(A.view());
}
template <typename Scalar>
Vector<Scalar> cholesky_inplace(Tile<Scalar>& A) {
  return cholesky_inplace<Scalar>(A.view());
}

}  // namespace detscale
