#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "bilbt/gramians.hpp"
#include "bilbt/system.hpp"
#include "bilbt/types.hpp"

namespace bilbt {

/// Rank-revealing factor L with L L^T = S for symmetric positive
/// semidefinite S. Eigendecomposition with eigenvalues clipped at
/// k eps lambda_max; columns ordered by decreasing eigenvalue so the
/// leading columns carry the mass. Throws NotPSD on a genuinely negative
/// eigenvalue (below -k eps lambda_max).
template <class Scalar>
MatX<Scalar> factor_psd(const MatX<Scalar>& S) {
  const Index k = S.rows();
  if (S.cols() != k) throw DimMismatch("factor_psd: matrix must be square");
  if ((S - S.transpose()).norm() > Scalar(1e-12) * std::max(S.norm(), Scalar(1)))
    throw NotPSD("factor_psd: matrix is not symmetric");

  Eigen::SelfAdjointEigenSolver<MatX<Scalar>> es(symmetrize(S));
  const VecX<Scalar> lam = es.eigenvalues();  // ascending
  const Scalar lmax = std::max(lam.maxCoeff(), Scalar(0));
  const Scalar clip = Scalar(k) * std::numeric_limits<Scalar>::epsilon() *
                      std::max(lmax, Scalar(1));
  if (lam.minCoeff() < -clip) throw NotPSD("factor_psd: negative eigenvalue");

  MatX<Scalar> L(k, k);
  for (Index i = 0; i < k; ++i) {
    const Scalar l = lam(k - 1 - i);
    L.col(i) = es.eigenvectors().col(k - 1 - i) * std::sqrt(std::max(l, Scalar(0)));
  }
  return L;
}

/// Singular values of the Hankel operator from a gramian pair:
/// sigma_i = sqrt(lambda_i(O P)), computed as the singular values of
/// L_O^T L_P. Sorted descending; entries below k eps sigma_1 are trimmed.
template <class Scalar>
VecX<Scalar> hankel_singular_values(const MatX<Scalar>& P, const MatX<Scalar>& O) {
  if (P.rows() != O.rows()) throw DimMismatch("hankel_singular_values: size mismatch");
  const MatX<Scalar> Lo = factor_psd(O);
  const MatX<Scalar> Lp = factor_psd(P);
  Eigen::JacobiSVD<MatX<Scalar>> svd(MatX<Scalar>(Lo.transpose() * Lp));
  VecX<Scalar> s = svd.singularValues();
  if (s.size() == 0) return s;
  const Scalar tol = Scalar(P.rows()) * std::numeric_limits<Scalar>::epsilon() * s(0);
  Index keep = 0;
  while (keep < s.size() && s(keep) > tol) ++keep;
  return s.head(keep);
}

/// Balanced realization: state transform T (and inverse) with
/// T P T^T = T^-T O T^-1 = diag(sigma), plus the transformed system.
template <class Scalar>
struct BalancedRealizationT {
  MatX<Scalar> T;
  MatX<Scalar> Tinv;
  VecX<Scalar> sigma;
  BilinearSystemT<Scalar> sys;
};

using BalancedRealization = BalancedRealizationT<double>;

template <class Scalar>
BilinearSystemT<Scalar> transform_system(const BilinearSystemT<Scalar>& sys,
                                         const MatX<Scalar>& T, const MatX<Scalar>& Tinv) {
  BilinearSystemT<Scalar> out;
  out.A = T * sys.A * Tinv;
  out.N.reserve(sys.N.size());
  for (const auto& Ni : sys.N) out.N.push_back(T * Ni * Tinv);
  out.B = T * sys.B;
  out.C = sys.C * Tinv;
  return out;
}

/// Square-root balancing. With O = L_O L_O^T, P = L_P L_P^T and the SVD
/// L_O^T L_P = U S V^T, the transform is T = S^-1/2 U^T L_O^T,
/// Tinv = L_P V S^-1/2. NotMinimal when the singular spectrum spans more
/// than 1e12 (the gramian product is numerically singular and the inverse
/// square roots blow up).
template <class Scalar>
BalancedRealizationT<Scalar> balance(const BilinearSystemT<Scalar>& sys,
                                     const GramianPairT<Scalar>& g) {
  require_valid(sys);
  const Index k = sys.state_dim();
  const MatX<Scalar> Lo = factor_psd(g.O);
  const MatX<Scalar> Lp = factor_psd(g.P);
  Eigen::JacobiSVD<MatX<Scalar>> svd(MatX<Scalar>(Lo.transpose() * Lp),
                                     Eigen::ComputeFullU | Eigen::ComputeFullV);
  const VecX<Scalar>& s = svd.singularValues();
  if (s(0) <= Scalar(0) || s(k - 1) <= s(0) / Scalar(1e12))
    throw NotMinimal("balance: gramian product is numerically singular");

  const VecX<Scalar> shalf = s.cwiseSqrt().cwiseInverse();
  BalancedRealizationT<Scalar> b;
  b.sigma = s;
  b.T = shalf.asDiagonal() * svd.matrixU().transpose() * Lo.transpose();
  b.Tinv = Lp * svd.matrixV() * shalf.asDiagonal();
  b.sys = transform_system(sys, b.T, b.Tinv);
  return b;
}

template <class Scalar>
BalancedRealizationT<Scalar> balance(const BilinearSystemT<Scalar>& sys) {
  return balance(sys, gramian_direct(sys));
}

template <class Scalar>
struct ReducedSystemT {
  BilinearSystemT<Scalar> sys;
  VecX<Scalar> sigma_kept;
  VecX<Scalar> sigma_discarded;
};

using ReducedSystem = ReducedSystemT<double>;

/// Keeps the r leading balanced states. DegenerateCut guards cuts through a
/// (near) repeated singular value, sigma_r - sigma_{r+1} <= 1e-10 sigma_1,
/// unless force is set.
template <class Scalar>
ReducedSystemT<Scalar> truncate(const BalancedRealizationT<Scalar>& bal, Index r,
                                bool force = false) {
  const Index k = bal.sigma.size();
  if (r < 1 || r > k) throw BadOrder("truncate: order must be in [1, state_dim]");
  if (r < k && !force && bal.sigma(r - 1) - bal.sigma(r) <= Scalar(1e-10) * bal.sigma(0))
    throw DegenerateCut("truncate: cut splits a repeated singular value");

  ReducedSystemT<Scalar> red;
  red.sys.A = bal.sys.A.topLeftCorner(r, r);
  for (const auto& Ni : bal.sys.N) red.sys.N.push_back(Ni.topLeftCorner(r, r));
  red.sys.B = bal.sys.B.topRows(r);
  red.sys.C = bal.sys.C.leftCols(r);
  red.sigma_kept = bal.sigma.head(r);
  red.sigma_discarded = bal.sigma.tail(k - r);
  return red;
}

}  // namespace bilbt
