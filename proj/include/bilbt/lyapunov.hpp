#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <vector>

#include "bilbt/types.hpp"

namespace bilbt {

template <class Scalar>
using CplxMatX = MatX<std::complex<Scalar>>;
template <class Scalar>
using CplxVecX = VecX<std::complex<Scalar>>;

template <class Scalar>
Scalar spectral_abscissa(const MatX<Scalar>& A) {
  if (A.rows() == 0) return Scalar(-1);
  Eigen::EigenSolver<MatX<Scalar>> es(A, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw SolveFailed("eigenvalue iteration failed");
  return es.eigenvalues().real().maxCoeff();
}

template <class Scalar>
Scalar spectral_radius(const MatX<Scalar>& A) {
  if (A.rows() == 0) return Scalar(0);
  Eigen::EigenSolver<MatX<Scalar>> es(A, false);
  if (es.info() != Eigen::Success) throw SolveFailed("eigenvalue iteration failed");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Spectral norm (largest singular value).
template <class Scalar>
Scalar operator_norm(const MatX<Scalar>& M) {
  if (M.size() == 0) return Scalar(0);
  Eigen::JacobiSVD<MatX<Scalar>> svd(M);
  return svd.singularValues()(0);
}

template <class Scalar>
MatX<Scalar> kron(const MatX<Scalar>& X, const MatX<Scalar>& Y) {
  MatX<Scalar> K(X.rows() * Y.rows(), X.cols() * Y.cols());
  for (Index i = 0; i < X.rows(); ++i)
    for (Index j = 0; j < X.cols(); ++j)
      K.block(i * Y.rows(), j * Y.cols(), Y.rows(), Y.cols()) = X(i, j) * Y;
  return K;
}

// Column-major stacking; unvec is its inverse.
template <class Scalar>
VecX<Scalar> vec(const MatX<Scalar>& M) {
  return Eigen::Map<const VecX<Scalar>>(M.data(), M.size());
}

template <class Scalar>
MatX<Scalar> unvec(const VecX<Scalar>& v, Index rows, Index cols) {
  if (v.size() != rows * cols) throw DimMismatch("unvec: size mismatch");
  return Eigen::Map<const MatX<Scalar>>(v.data(), rows, cols);
}

template <class Scalar>
MatX<Scalar> symmetrize(const MatX<Scalar>& M) {
  return ((M + M.transpose()) / Scalar(2)).eval();
}

/// Relative residual of A^T X + X A + Q = 0 in Frobenius norms,
/// scaled by 2 ||A|| ||X|| + ||Q||.
template <class Scalar>
Scalar lyapunov_residual(const MatX<Scalar>& A, const MatX<Scalar>& X,
                         const MatX<Scalar>& Q) {
  const Scalar num = (A.transpose() * X + X * A + Q).norm();
  const Scalar den = Scalar(2) * A.norm() * X.norm() + Q.norm();
  return den > Scalar(0) ? num / den : num;
}

/// Solves A^T X + X A + Q = 0 for Hurwitz A and symmetric Q.
///
/// Schur reduction: with A = U T U^* (complex Schur) and X = U Y U^*, the
/// equation becomes T^* Y + Y T = -U^* Q U, which solves column by column
/// since T^* + T(j,j) I is lower triangular. The result is symmetrized and
/// its residual checked against 1e-8 relative (callers that need 1e-10 assert
/// it themselves; the solve is direct, so it lands near machine precision).
template <class Scalar>
MatX<Scalar> solve_lyapunov(const MatX<Scalar>& A, const MatX<Scalar>& Q) {
  using Cplx = std::complex<Scalar>;
  const Index k = A.rows();
  if (A.cols() != k || Q.rows() != k || Q.cols() != k)
    throw DimMismatch("solve_lyapunov: A and Q must be square of equal size");
  if (!(spectral_abscissa(A) < Scalar(0)))
    throw NotStable("solve_lyapunov: A is not Hurwitz");

  Eigen::ComplexSchur<CplxMatX<Scalar>> schur(A.template cast<Cplx>());
  if (schur.info() != Eigen::Success) throw SolveFailed("Schur factorization failed");
  const CplxMatX<Scalar>& T = schur.matrixT();
  const CplxMatX<Scalar>& U = schur.matrixU();

  const CplxMatX<Scalar> Qt = U.adjoint() * Q.template cast<Cplx>() * U;
  CplxMatX<Scalar> Y = CplxMatX<Scalar>::Zero(k, k);
  CplxMatX<Scalar> L = T.adjoint();
  for (Index j = 0; j < k; ++j) {
    CplxVecX<Scalar> rhs = -Qt.col(j);
    if (j > 0) rhs.noalias() -= Y.leftCols(j) * T.col(j).head(j);
    L.diagonal().array() += T(j, j);
    Y.col(j) = L.template triangularView<Eigen::Lower>().solve(rhs);
    L.diagonal().array() -= T(j, j);
  }

  MatX<Scalar> X = symmetrize(MatX<Scalar>((U * Y * U.adjoint()).real()));
  if (lyapunov_residual(A, X, Q) > Scalar(1e-8))
    throw SolveFailed("solve_lyapunov: residual above 1e-8 relative");
  return X;
}

}  // namespace bilbt
