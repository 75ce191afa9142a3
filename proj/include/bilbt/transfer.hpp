#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "bilbt/balancing.hpp"
#include "bilbt/error_bound.hpp"
#include "bilbt/lyapunov.hpp"
#include "bilbt/system.hpp"
#include "bilbt/types.hpp"

namespace bilbt {

template <class Scalar>
using MatXc = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;

/// Order-k frequency-domain kernel
///   G_k(s_1..s_{k+1}) = C R(s_1) N_{c_1} R(s_2) ... N_{c_k} R(s_{k+1}) B,
/// R(s) = (sI - A)^-1, returned as an out_dim x (n^k * n) matrix whose
/// column tuple (c_1, ..., c_k, in-channel) is lexicographic with c_1
/// slowest. Order is s.size() - 1.
template <class Scalar>
MatXc<Scalar> transfer_kernel(const BilinearSystemT<Scalar>& sys,
                              const std::vector<std::complex<Scalar>>& s) {
  require_valid(sys);
  if (s.empty()) throw BadOrder("need at least one frequency");
  const Index d = sys.state_dim();
  const int order = int(s.size()) - 1;
  const MatXc<Scalar> A = sys.A.template cast<std::complex<Scalar>>();
  const MatXc<Scalar> I = MatXc<Scalar>::Identity(d, d);

  auto resolvent_apply = [&](std::complex<Scalar> sv, const MatXc<Scalar>& X) {
    Eigen::PartialPivLU<MatXc<Scalar>> lu(sv * I - A);
    MatXc<Scalar> Y = lu.solve(X);
    if (!Y.allFinite()) throw SingularResolvent("resolvent blew up on the grid");
    return Y;
  };

  MatXc<Scalar> Y = resolvent_apply(s.back(), sys.B.template cast<std::complex<Scalar>>());
  for (int j = order; j >= 1; --j) {
    MatXc<Scalar> Z(d, Index(sys.N.size()) * Y.cols());
    for (Index c = 0; c < Index(sys.N.size()); ++c)
      Z.middleCols(c * Y.cols(), Y.cols()) =
          sys.N[c].template cast<std::complex<Scalar>>() * Y;
    Y = resolvent_apply(s[j - 1], Z);
  }
  return sys.C.template cast<std::complex<Scalar>>() * Y;
}

/// Time-domain kernel of order (k, j): with E(t) = e^{At},
///   h(t_0..t_{k+j}) = C E(t_0) N_{a_1} E(t_1) .. N_{a_k} E(t_k)
///                     N_{b_1} E(t_{k+1}) .. N_{b_j} E(t_{k+j}) B.
/// Argument t_k bridges the two factor chains, so the same function is
/// reshaped differently for every split of k+j. Rows group (a_1..a_k, out)
/// with a_1 slowest; columns group (b_1..b_j, in) with b_1 slowest. The
/// entrywise Frobenius norm is split-independent.
template <class Scalar>
MatX<Scalar> volterra_kernel(const BilinearSystemT<Scalar>& sys, int k, int j,
                             const std::vector<Scalar>& times) {
  require_valid(sys);
  if (k < 0 || j < 0) throw BadOrder("kernel orders must be nonnegative");
  if (Index(times.size()) != Index(k + j + 1))
    throw DimMismatch("kernel of order (k,j) takes k+j+1 time arguments");
  for (Scalar t : times)
    if (!(t >= 0)) throw BadOrder("kernel times must be nonnegative");
  const Index n = sys.input_dim();
  const Index out = sys.output_dim();

  auto expA = [&](Scalar t) { return MatX<Scalar>((sys.A * t).exp()); };

  // row digit a_i stays slower than a_{i+1}, the output index is innermost
  MatX<Scalar> W = sys.C * expA(times[0]);
  for (int i = 1; i <= k; ++i) {
    const MatX<Scalar> E = expA(times[size_t(i)]);
    const Index groups = W.rows() / out;
    MatX<Scalar> next(n * W.rows(), W.cols());
    for (Index g = 0; g < groups; ++g)
      for (Index c = 0; c < n; ++c)
        next.middleRows((g * n + c) * out, out) =
            W.middleRows(g * out, out) * sys.N[size_t(c)] * E;
    W = std::move(next);
  }

  MatX<Scalar> R = sys.B;
  for (int l = j; l >= 1; --l) {
    const MatX<Scalar> E = expA(times[size_t(k + l)]);
    MatX<Scalar> next(R.rows(), n * R.cols());
    for (Index c = 0; c < n; ++c)
      next.middleCols(c * R.cols(), R.cols()) = sys.N[size_t(c)] * E * R;
    R = std::move(next);
  }
  return W * R;
}

/// Sampling plan for mixed sup/L2 norms on the imaginary axis. The sup
/// variable starts from sup_points equispaced frequencies in
/// [-sup_max, sup_max] (odd counts hit 0) and is refined by dyadic midpoint
/// insertion; the running max is monotone under refinement and is declared
/// converged once a full refinement level improves it by less than
/// refine_tol relatively. When a quadrature variable remains (order 2 with
/// the sup at an edge slot) it is truncated to [-int_max, int_max] and
/// refined dyadically from int_points0 intervals under the same tolerance.
template <class Scalar>
struct FrequencyGridT {
  Scalar sup_max = 30;
  int sup_points = 33;
  Scalar int_max = 200;
  int int_points0 = 128;
  Scalar refine_tol = Scalar(1e-2);
  int max_refine = 8;
};

using FrequencyGrid = FrequencyGridT<double>;

template <class Scalar>
struct MixedNormEstimateT {
  Scalar value = 0;
  bool converged = false;
  int levels = 0;
};

using MixedNormEstimate = MixedNormEstimateT<double>;

namespace detail {

/// Dyadically refined trapezoid estimate of
///   (2 pi)^-1 int_-int_max^int_max  sum_{p,q} ||P_p R(i w) S_q||_F^2  dw.
/// The finest level is reported; convergence means the last refinement
/// moved the value by less than refine_tol relatively. Coarse trapezoid
/// levels overshoot a resolvent peak badly, so earlier levels only steer
/// the refinement and never enter the result.
template <class Scalar>
MixedNormEstimateT<Scalar> resolvent_l2_sq(const MatXc<Scalar>& A,
                                           const std::vector<MatXc<Scalar>>& pre,
                                           const std::vector<MatXc<Scalar>>& post,
                                           const FrequencyGridT<Scalar>& grid) {
  const Index d = A.rows();
  const MatXc<Scalar> I = MatXc<Scalar>::Identity(d, d);
  auto integrand = [&](Scalar w) {
    Eigen::PartialPivLU<MatXc<Scalar>> lu(std::complex<Scalar>(0, w) * I - A);
    Scalar acc = 0;
    for (const auto& S : post) {
      const MatXc<Scalar> RS = lu.solve(S);
      for (const auto& P : pre) acc += (P * RS).squaredNorm();
    }
    return acc;
  };

  const Scalar a = -grid.int_max, b = grid.int_max;
  int n = grid.int_points0;
  Scalar h = (b - a) / Scalar(n);
  Scalar tz = (integrand(a) + integrand(b)) / 2;
  for (int i = 1; i < n; ++i) tz += integrand(a + h * Scalar(i));
  Scalar raw = tz * h;

  MixedNormEstimateT<Scalar> est;
  est.value = raw;
  for (int lev = 1; lev <= grid.max_refine; ++lev) {
    Scalar mid = 0;
    for (int i = 0; i < n; ++i) mid += integrand(a + h * (Scalar(i) + Scalar(0.5)));
    tz += mid;
    n *= 2;
    h /= 2;
    const Scalar next = tz * h;
    est.levels = lev;
    est.value = next;
    if (std::abs(next - raw) <= grid.refine_tol * std::max(std::abs(next), Scalar(1e-300))) {
      est.converged = true;
      raw = next;
      break;
    }
    raw = next;
  }
  est.value /= Scalar(2) * Scalar(EIGEN_PI);
  return est;
}

/// Maximize value_at over [-sup_max, sup_max]: coarse scan, then dyadic
/// midpoint refinement with a running max. inner_ok collects convergence
/// flags of any quadrature done inside value_at.
template <class Scalar, class F>
MixedNormEstimateT<Scalar> sup_scan(F&& value_at, const FrequencyGridT<Scalar>& grid,
                                    bool& inner_ok) {
  const int n0 = std::max(grid.sup_points, 2);
  const Scalar a = -grid.sup_max;
  const Scalar w0 = (Scalar(2) * grid.sup_max) / Scalar(n0 - 1);

  MixedNormEstimateT<Scalar> est;
  for (int i = 0; i < n0; ++i) est.value = std::max(est.value, value_at(a + w0 * Scalar(i)));

  Scalar raw = est.value;
  Scalar h = w0;
  long intervals = n0 - 1;
  for (int lev = 1; lev <= grid.max_refine; ++lev) {
    Scalar best_mid = 0;
    for (long i = 0; i < intervals; ++i)
      best_mid = std::max(best_mid, value_at(a + h * (Scalar(i) + Scalar(0.5))));
    est.levels = lev;
    est.value = std::max(est.value, best_mid);
    intervals *= 2;
    h /= 2;
    if (est.value - raw <= grid.refine_tol * std::max(est.value, Scalar(1e-300))) {
      est.converged = true;
      break;
    }
    raw = est.value;
  }
  est.converged = est.converged && inner_ok;
  return est;
}

}  // namespace detail

/// Mixed Hardy norm of the order-g kernel difference surrogate G_g of a
/// single system: the sup runs over the frequency slot sup_index (1-based,
/// 1..g+1); every other slot is an L2 norm over its imaginary axis with a
/// (2 pi)^-1 weight. L2 slots adjacent to B or C collapse exactly into the
/// linear gramians by Plancherel, so only these cases need quadrature:
/// order 2 with the sup at slot 1 or 3 integrates the middle slot
/// numerically. Defaults for sup_index: slot 1 for orders 0..1, slot 2 for
/// order 2 (the slot the trace-norm estimate controls). Orders above 2
/// exceed the budget and throw BadOrder.
template <class Scalar>
MixedNormEstimateT<Scalar> mixed_hardy_norm(const BilinearSystemT<Scalar>& sys, int order,
                                            int sup_index,
                                            const FrequencyGridT<Scalar>& grid = {}) {
  require_valid(sys);
  if (order < 0 || order > 2) throw BadOrder("mixed Hardy norms computed for orders 0..2 only");
  if (sup_index < 1 || sup_index > order + 1)
    throw BadOrder("sup slot must lie in 1..order+1");
  if (grid.sup_points < 1) throw BadOrder("need at least one sup sample");
  const Index d = sys.state_dim();
  const MatXc<Scalar> A = sys.A.template cast<std::complex<Scalar>>();
  const MatXc<Scalar> I = MatXc<Scalar>::Identity(d, d);
  const MatXc<Scalar> B = sys.B.template cast<std::complex<Scalar>>();
  const MatXc<Scalar> C = sys.C.template cast<std::complex<Scalar>>();

  auto resolvent = [&](Scalar w) {
    return Eigen::PartialPivLU<MatXc<Scalar>>(std::complex<Scalar>(0, w) * I - A);
  };

  // Plancherel end caps: reachability factor for a trailing L2 slot,
  // observability factor for a leading one.
  // a trailing L2 slot (never holding the sup) collapses into P, a leading
  // one into O; the sup slot itself is evaluated pointwise
  MatXc<Scalar> Lp, LoT;
  const bool need_p = (order == 1 && sup_index == 1) || (order == 2 && sup_index <= 2);
  const bool need_o = (order == 1 && sup_index == 2) || (order == 2 && sup_index >= 2);
  if (need_p) {
    const MatX<Scalar> P = solve_lyapunov<Scalar>(sys.A.transpose(), sys.B * sys.B.transpose());
    Lp = factor_psd(P).template cast<std::complex<Scalar>>();
  }
  if (need_o) {
    const MatX<Scalar> O = solve_lyapunov<Scalar>(sys.A, sys.C.transpose() * sys.C);
    LoT = factor_psd(O).transpose().template cast<std::complex<Scalar>>();
  }

  bool inner_ok = true;

  auto value_at = [&](Scalar w) -> Scalar {
    auto lu = resolvent(w);
    Scalar sq = 0;
    if (order == 0) {
      return (C * lu.solve(B)).norm();
    }
    if (order == 1) {
      if (sup_index == 1) {
        const MatXc<Scalar> CR = C * lu.solve(MatXc<Scalar>(I));
        for (const auto& Nc : sys.N)
          sq += (CR * (Nc.template cast<std::complex<Scalar>>() * Lp)).squaredNorm();
      } else {
        const MatXc<Scalar> RB = lu.solve(B);
        for (const auto& Nc : sys.N)
          sq += (LoT * (Nc.template cast<std::complex<Scalar>>() * RB)).squaredNorm();
      }
      return std::sqrt(sq);
    }
    if (sup_index == 2) {
      for (const auto& Na : sys.N) {
        const MatXc<Scalar> RNLp = lu.solve(
            MatXc<Scalar>(Na.template cast<std::complex<Scalar>>() * Lp));
        for (const auto& Nb : sys.N)
          sq += (LoT * (Nb.template cast<std::complex<Scalar>>() * RNLp)).squaredNorm();
      }
      return std::sqrt(sq);
    }
    // order 2, sup at an edge slot: quadrature over the middle slot.
    std::vector<MatXc<Scalar>> pre, post;
    if (sup_index == 1) {
      const MatXc<Scalar> CR = C * lu.solve(MatXc<Scalar>(I));
      for (const auto& Nc : sys.N) pre.push_back(CR * Nc.template cast<std::complex<Scalar>>());
      for (const auto& Nc : sys.N) post.push_back(Nc.template cast<std::complex<Scalar>>() * Lp);
    } else {
      const MatXc<Scalar> RB = lu.solve(B);
      for (const auto& Nc : sys.N) pre.push_back(LoT * Nc.template cast<std::complex<Scalar>>());
      for (const auto& Nc : sys.N) post.push_back(Nc.template cast<std::complex<Scalar>>() * RB);
    }
    const auto est = detail::resolvent_l2_sq(A, pre, post, grid);
    inner_ok = inner_ok && est.converged;
    return std::sqrt(est.value);
  };

  return detail::sup_scan<Scalar>(value_at, grid, inner_ok);
}

template <class Scalar>
MixedNormEstimateT<Scalar> mixed_hardy_norm(const BilinearSystemT<Scalar>& sys, int order,
                                            const FrequencyGridT<Scalar>& grid = {}) {
  return mixed_hardy_norm(sys, order, order == 2 ? 2 : 1, grid);
}

template <class Scalar>
struct TransferBoundCheckT {
  Scalar delta_tc = 0;           // trace-norm distance of the Hankel operators
  Scalar bound = 0;              // 4 * delta_tc
  std::vector<MixedNormEstimateT<Scalar>> per_order;
  Scalar partial_sum = 0;
  bool converged = false;
  bool ok = false;
};

using TransferBoundCheck = TransferBoundCheckT<double>;

/// Frequency-domain certificate: the summed mixed Hardy norms of the kernel
/// differences through order kmax must stay below four times the Hankel
/// trace-norm distance. Kernel differences are evaluated on the composite
/// system (outputs subtract), so one sweep per order covers both systems.
/// Sup slots follow the defaults of mixed_hardy_norm.
template <class Scalar>
TransferBoundCheckT<Scalar> transfer_bound_check(const BilinearSystemT<Scalar>& full,
                                            const BilinearSystemT<Scalar>& red, int kmax = 2,
                                            const FrequencyGridT<Scalar>& grid = {}) {
  if (kmax < 0 || kmax > 2) throw BadOrder("orders 0..2 only");
  const CompositeSystemT<Scalar> comp = composite_system(full, red);

  TransferBoundCheckT<Scalar> chk;
  chk.delta_tc = delta_hankel_trace_norm(full, red).value;
  chk.bound = Scalar(4) * chk.delta_tc;
  chk.converged = true;
  for (int g = 0; g <= kmax; ++g) {
    chk.per_order.push_back(mixed_hardy_norm(comp.sys, g, grid));
    chk.partial_sum += chk.per_order.back().value;
    chk.converged = chk.converged && chk.per_order.back().converged;
  }
  chk.ok = chk.partial_sum <= chk.bound * (Scalar(1) + Scalar(1e-6));
  return chk;
}

}  // namespace bilbt
