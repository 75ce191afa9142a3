#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bilbt/lyapunov.hpp"
#include "bilbt/system.hpp"
#include "bilbt/types.hpp"

namespace bilbt {

/// Reachability / observability gramian pair with the relative residuals of
/// the generalized Lyapunov equations they were solved from:
///   A P + P A^T + sum_i w_i N_i P N_i^T + B B^T = 0
///   A^T O + O A + sum_i w_i N_i^T O N_i + C^T C = 0
template <class Scalar>
struct GramianPairT {
  MatX<Scalar> P;
  MatX<Scalar> O;
  Scalar res_P = 0;
  Scalar res_O = 0;
};

using GramianPair = GramianPairT<double>;

/// Matrix of the map S -> A S + S A^T + sum_i w_i N_i S N_i^T in the
/// column-major vec basis: I (x) A + A (x) I + sum_i w_i N_i (x) N_i.
/// The observability-side operator is exactly the transpose.
template <class Scalar>
MatX<Scalar> kron_generator(const MatX<Scalar>& A, const std::vector<MatX<Scalar>>& N,
                            const std::vector<Scalar>& weights = {}) {
  const Index k = A.rows();
  const MatX<Scalar> I = MatX<Scalar>::Identity(k, k);
  MatX<Scalar> L = kron(I, A) + kron(A, I);
  for (size_t i = 0; i < N.size(); ++i) {
    const Scalar w = weights.empty() ? Scalar(1) : weights[i];
    L += w * kron(N[i], N[i]);
  }
  return L;
}

template <class Scalar>
Scalar generalized_residual(const MatX<Scalar>& A, const std::vector<MatX<Scalar>>& N,
                            const std::vector<Scalar>& weights, const MatX<Scalar>& X,
                            const MatX<Scalar>& RHS, bool obs_side) {
  MatX<Scalar> R = obs_side ? MatX<Scalar>(A.transpose() * X + X * A)
                            : MatX<Scalar>(A * X + X * A.transpose());
  Scalar den = Scalar(2) * A.norm() * X.norm() + RHS.norm();
  for (size_t i = 0; i < N.size(); ++i) {
    const Scalar w = weights.empty() ? Scalar(1) : weights[i];
    R += obs_side ? MatX<Scalar>(w * N[i].transpose() * X * N[i])
                  : MatX<Scalar>(w * N[i] * X * N[i].transpose());
    den += std::abs(w) * N[i].norm() * N[i].norm() * X.norm();
  }
  R += RHS;
  return den > Scalar(0) ? R.norm() / den : R.norm();
}

/// Gramians by one linear solve in the vec basis (the generalized Lyapunov
/// equations are k^2 x k^2 linear systems). Checks that the generator
/// spectrum lies in the open left half plane first; that is exactly
/// mean-square stability in the stochastic reading, hence NotMSStable.
/// Weights default to 1 (the bilinear case).
template <class Scalar>
GramianPairT<Scalar> gramian_direct(const BilinearSystemT<Scalar>& sys,
                                    const std::vector<Scalar>& weights = {}) {
  require_valid(sys);
  if (!weights.empty() && weights.size() != sys.N.size())
    throw DimMismatch("gramian_direct: one weight per channel expected");

  const Index k = sys.state_dim();
  const MatX<Scalar> L = kron_generator(sys.A, sys.N, weights);
  const Scalar alpha = spectral_abscissa(L);
  if (!(alpha < Scalar(0)))
    throw NotMSStable("generalized Lyapunov operator abscissa " +
                      std::to_string(double(alpha)) + " is not negative");

  const MatX<Scalar> BBt = sys.B * sys.B.transpose();
  const MatX<Scalar> CtC = sys.C.transpose() * sys.C;

  GramianPairT<Scalar> g;
  {
    Eigen::PartialPivLU<MatX<Scalar>> lu(L);
    g.P = symmetrize(unvec<Scalar>(lu.solve(-vec(BBt)), k, k));
  }
  {
    Eigen::PartialPivLU<MatX<Scalar>> lu(MatX<Scalar>(L.transpose()));
    g.O = symmetrize(unvec<Scalar>(lu.solve(-vec(CtC)), k, k));
  }
  g.res_P = generalized_residual(sys.A, sys.N, weights, g.P, BBt, false);
  g.res_O = generalized_residual(sys.A, sys.N, weights, g.O, CtC, true);
  if (g.res_P > Scalar(1e-8) || g.res_O > Scalar(1e-8))
    throw SolveFailed("gramian_direct: residual above 1e-8 relative");

  for (const MatX<Scalar>* X : {&g.P, &g.O}) {
    Eigen::SelfAdjointEigenSolver<MatX<Scalar>> es(*X, Eigen::EigenvaluesOnly);
    const Scalar lmax = std::max(Scalar(0), es.eigenvalues().maxCoeff());
    if (es.eigenvalues().minCoeff() <
        -Scalar(k) * std::numeric_limits<Scalar>::epsilon() * std::max(lmax, Scalar(1)))
      throw NotPSD("gramian_direct: solution has a negative eigenvalue");
  }
  return g;
}

/// Gramian series terms. O_0 solves the plain Lyapunov equation with C^T C;
/// O_i feeds the previous term back through the bilinear channels,
/// O_i from sum_j N_j^T O_{i-1} N_j. The P side is the transposed story
/// started from B B^T. Partial sums converge to the gramian pair whenever
/// theta < 1, and the term norms decay at rate theta.
template <class Scalar>
struct TruncatedGramianSeriesT {
  std::vector<MatX<Scalar>> P_terms;
  std::vector<MatX<Scalar>> O_terms;

  MatX<Scalar> partial_P(size_t k) const { return sum(P_terms, k); }
  MatX<Scalar> partial_O(size_t k) const { return sum(O_terms, k); }

 private:
  static MatX<Scalar> sum(const std::vector<MatX<Scalar>>& terms, size_t k) {
    if (terms.empty()) throw BadOrder("empty gramian series");
    MatX<Scalar> S = MatX<Scalar>::Zero(terms[0].rows(), terms[0].cols());
    for (size_t i = 0; i < k && i < terms.size(); ++i) S += terms[i];
    return S;
  }
};

using TruncatedGramianSeries = TruncatedGramianSeriesT<double>;

/// depth = 0 picks the smallest k with theta^k ||term_0|| < 1e-12 (capped at
/// 60), which needs a certificate with theta < 1; pass depth explicitly to
/// bypass the certificate requirement.
template <class Scalar>
TruncatedGramianSeriesT<Scalar> gramian_series(const BilinearSystemT<Scalar>& sys,
                                               int depth = 0) {
  require_valid(sys);
  if (depth <= 0) {
    const auto cert = stability_certificate(sys);
    if (!(cert.theta < Scalar(1)))
      throw MissingCertificate("theta = " + std::to_string(double(cert.theta)) +
                               " >= 1: pass an explicit series depth");
    const MatX<Scalar> O0 = solve_lyapunov(sys.A, MatX<Scalar>(sys.C.transpose() * sys.C));
    const Scalar t0 = operator_norm(O0);
    depth = 1;
    Scalar tail = t0;
    while (depth < 60 && !(tail < Scalar(1e-12))) {
      tail *= cert.theta;
      ++depth;
    }
  }

  TruncatedGramianSeriesT<Scalar> s;
  s.O_terms.push_back(solve_lyapunov(sys.A, MatX<Scalar>(sys.C.transpose() * sys.C)));
  s.P_terms.push_back(
      solve_lyapunov(MatX<Scalar>(sys.A.transpose()), MatX<Scalar>(sys.B * sys.B.transpose())));
  for (int i = 1; i < depth; ++i) {
    const Index k = sys.state_dim();
    MatX<Scalar> Qo = MatX<Scalar>::Zero(k, k);
    MatX<Scalar> Qp = MatX<Scalar>::Zero(k, k);
    for (const auto& Nj : sys.N) {
      Qo += Nj.transpose() * s.O_terms.back() * Nj;
      Qp += Nj * s.P_terms.back() * Nj.transpose();
    }
    s.O_terms.push_back(solve_lyapunov(sys.A, Qo));
    s.P_terms.push_back(solve_lyapunov(MatX<Scalar>(sys.A.transpose()), Qp));
  }
  return s;
}

/// Squared Hardy-2 norm of the full kernel family, evaluated two ways:
/// tr(B B^T O) and tr(C^T C P). Both agree for exact gramians.
template <class Scalar>
struct H2NormsT {
  Scalar via_O = 0;
  Scalar via_P = 0;
};

using H2Norms = H2NormsT<double>;

template <class Scalar>
H2NormsT<Scalar> h2_norm(const BilinearSystemT<Scalar>& sys,
                         const GramianPairT<Scalar>& g) {
  H2NormsT<Scalar> h;
  h.via_O = (sys.B * sys.B.transpose() * g.O).trace();
  h.via_P = (sys.C.transpose() * sys.C * g.P).trace();
  return h;
}

template <class Scalar>
H2NormsT<Scalar> h2_norm(const BilinearSystemT<Scalar>& sys) {
  return h2_norm(sys, gramian_direct(sys));
}

}  // namespace bilbt
