#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "bilbt/balancing.hpp"
#include "bilbt/system.hpp"
#include "bilbt/types.hpp"

namespace bilbt {

/// Galerkin grid for the Hankel operator on the Fock space of L2(0,inf)
/// levels. Each time variable is expanded in the orthonormal Laguerre basis
/// l_j(t) = sqrt(2a) exp(-a t) L_j(2 a t), j < modes; levels 0..depth-1 are
/// kept on both the row (observability) and column (reachability) side.
template <class Scalar>
struct FockGridT {
  Scalar a = 1;     // Laguerre scale, natural choice: certificate nu
  int modes = 20;   // Laguerre modes per time variable
  int depth = 3;    // kernel levels kept per side
};

using FockGrid = FockGridT<double>;

/// Semigroup moments E(j) = int_0^inf l_j(t) exp(At) dt. Closed form
/// E(j) = sqrt(2a) (-1)^j (A + aI)^j (aI - A)^-(j+1); the factors commute,
/// so the recursion E(j) = -(A + aI)(aI - A)^-1 E(j-1) is exact.
/// Throws SingularResolvent when aI - A is (numerically) singular.
template <class Scalar>
std::vector<MatX<Scalar>> laguerre_semigroup_moments(const MatX<Scalar>& A, Scalar a,
                                                     int modes) {
  if (!(a > Scalar(0))) throw BadOrder("laguerre scale must be positive");
  if (modes < 1) throw BadOrder("need at least one Laguerre mode");
  const Index k = A.rows();
  const MatX<Scalar> S = a * MatX<Scalar>::Identity(k, k) - A;
  Eigen::FullPivLU<MatX<Scalar>> lu(S);
  if (!lu.isInvertible() ||
      lu.rcond() < std::numeric_limits<Scalar>::epsilon() * Scalar(100))
    throw SingularResolvent("aI - A is singular at a = " + std::to_string(double(a)));
  const MatX<Scalar> Sinv = lu.inverse();
  const MatX<Scalar> step = -(A + a * MatX<Scalar>::Identity(k, k)) * Sinv;

  std::vector<MatX<Scalar>> E;
  E.reserve(modes);
  E.push_back(std::sqrt(Scalar(2) * a) * Sinv);
  for (int j = 1; j < modes; ++j) E.push_back(step * E.back());
  return E;
}

/// Discretized Hankel operator in factored form. Every block
/// H_{k,j} = W_k R_j factors through the state space, so each level only
/// needs its state-size Gram matrix:
///   obs_gram[k]   = W_k^T W_k,   reach_gram[j] = R_j R_j^T.
/// Singular values, Hilbert-Schmidt and trace norms all come from these;
/// the dense matrix is materialized only within the entry budget and is
/// bitwise consistent with the factored quantities.
///
/// Index conventions of the dense rows/columns, fixed once here: chains are
/// extended on the right, so at level k the row tuple is
///   (c_k, j_k, ..., c_1, j_1, j_0, out-channel)   [lexicographic, left slow]
/// encoding the kernel factor C E(j_0) N_{c_1} E(j_1) ... N_{c_k} E(j_k).
/// The column-side convention is stated at assemble_hankel.
template <class Scalar>
struct HankelMatrixT {
  FockGridT<Scalar> grid;
  Index state_dim = 0, in_dim = 0, out_dim = 0;
  std::vector<MatX<Scalar>> obs_gram;
  std::vector<MatX<Scalar>> reach_gram;
  std::vector<Index> row_dims, col_dims;
  std::optional<MatX<Scalar>> dense;

  Index row_total() const {
    Index t = 0;
    for (Index d : row_dims) t += d;
    return t;
  }
  Index col_total() const {
    Index t = 0;
    for (Index d : col_dims) t += d;
    return t;
  }
  MatX<Scalar> total_obs_gram() const { return sum(obs_gram); }
  MatX<Scalar> total_reach_gram() const { return sum(reach_gram); }

 private:
  static MatX<Scalar> sum(const std::vector<MatX<Scalar>>& v) {
    MatX<Scalar> S = MatX<Scalar>::Zero(v[0].rows(), v[0].cols());
    for (const auto& m : v) S += m;
    return S;
  }
};

using HankelMatrix = HankelMatrixT<double>;

struct HankelOptions {
  Index dense_budget = 20000;  // max row_total + col_total for densification
  bool require_dense = false;  // throw BudgetExceeded instead of skipping
};

namespace detail {

template <class Scalar>
std::vector<MatX<Scalar>> obs_level_grams(const BilinearSystemT<Scalar>& sys,
                                          const std::vector<MatX<Scalar>>& E, int depth) {
  const Index d = sys.state_dim();
  std::vector<MatX<Scalar>> G;
  MatX<Scalar> g = MatX<Scalar>::Zero(d, d);
  const MatX<Scalar> CtC = sys.C.transpose() * sys.C;
  for (const auto& Ej : E) g += Ej.transpose() * CtC * Ej;
  G.push_back(symmetrize(g));
  for (int l = 1; l < depth; ++l) {
    MatX<Scalar> next = MatX<Scalar>::Zero(d, d);
    for (const auto& Nc : sys.N)
      for (const auto& Ej : E) {
        const MatX<Scalar> F = Nc * Ej;
        next += F.transpose() * G.back() * F;
      }
    G.push_back(symmetrize(next));
  }
  return G;
}

template <class Scalar>
std::vector<MatX<Scalar>> reach_level_grams(const BilinearSystemT<Scalar>& sys,
                                            const std::vector<MatX<Scalar>>& E, int depth,
                                            const MatX<Scalar>& B) {
  const Index d = sys.state_dim();
  std::vector<MatX<Scalar>> G;
  MatX<Scalar> g = MatX<Scalar>::Zero(d, d);
  const MatX<Scalar> BBt = B * B.transpose();
  for (const auto& Ej : E) g += Ej * BBt * Ej.transpose();
  G.push_back(symmetrize(g));
  for (int l = 1; l < depth; ++l) {
    MatX<Scalar> next = MatX<Scalar>::Zero(d, d);
    for (const auto& Nc : sys.N)
      for (const auto& Ej : E) {
        const MatX<Scalar> F = Ej * Nc;
        next += F * G.back() * F.transpose();
      }
    G.push_back(symmetrize(next));
  }
  return G;
}

}  // namespace detail

/// Assembles the Galerkin matrix of the Hankel operator on the given grid.
///
/// Level Grams are always computed (state-size recursions, cheap at any
/// grid). The dense matrix is built when row_total + col_total fits the
/// budget; its blocks are H_{k,j} = Wf_k Rf_j with the explicit factors
///   Wf_0 = stack_j C E(j),          Wf_l = stack_{c,j} Wf_{l-1} N_c E(j)
///   Rf_0 = concat_i E(i) B,         Rf_l = concat_{c,i} E(i) N_c Rf_{l-1}
/// (new indices most significant: row tuple (c_l, j_l, ..., c_1, j_1, j_0,
/// out-channel), column tuple (c_l, i_l, ..., c_1, i_1, i_0, in-channel);
/// on the column side the newest moment index is the factor adjacent to the
/// row side and the channel order inside the kernel chain runs reversed).
template <class Scalar>
HankelMatrixT<Scalar> assemble_hankel(const BilinearSystemT<Scalar>& sys,
                                      const FockGridT<Scalar>& grid,
                                      const HankelOptions& opts = {}) {
  require_valid(sys);
  if (grid.depth < 1) throw BadOrder("fock depth must be at least 1");
  const auto E = laguerre_semigroup_moments(sys.A, grid.a, grid.modes);

  HankelMatrixT<Scalar> H;
  H.grid = grid;
  H.state_dim = sys.state_dim();
  H.in_dim = sys.input_dim();
  H.out_dim = sys.output_dim();
  H.obs_gram = detail::obs_level_grams(sys, E, grid.depth);
  H.reach_gram = detail::reach_level_grams(sys, E, grid.depth, sys.B);

  Index rd = grid.modes * sys.output_dim();
  Index cd = grid.modes * sys.input_dim();
  const Index fan = Index(grid.modes) * sys.input_dim();
  for (int l = 0; l < grid.depth; ++l) {
    H.row_dims.push_back(rd);
    H.col_dims.push_back(cd);
    rd *= fan;
    cd *= fan;
  }

  const Index total = H.row_total() + H.col_total();
  if (total > opts.dense_budget) {
    if (opts.require_dense)
      throw BudgetExceeded("dense Hankel needs row+col = " + std::to_string(total) +
                           " > budget " + std::to_string(opts.dense_budget));
    return H;
  }

  std::vector<MatX<Scalar>> Wf, Rf;
  {
    MatX<Scalar> W0(H.row_dims[0], H.state_dim);
    for (int j = 0; j < grid.modes; ++j)
      W0.middleRows(Index(j) * H.out_dim, H.out_dim) = sys.C * E[j];
    Wf.push_back(std::move(W0));
    MatX<Scalar> R0(H.state_dim, H.col_dims[0]);
    for (int i = 0; i < grid.modes; ++i)
      R0.middleCols(Index(i) * H.in_dim, H.in_dim) = E[i] * sys.B;
    Rf.push_back(std::move(R0));
  }
  for (int l = 1; l < grid.depth; ++l) {
    const MatX<Scalar>& Wp = Wf.back();
    MatX<Scalar> W(H.row_dims[l], H.state_dim);
    Index r = 0;
    for (size_t c = 0; c < sys.N.size(); ++c)
      for (int j = 0; j < grid.modes; ++j) {
        W.middleRows(r, Wp.rows()) = Wp * (sys.N[c] * E[j]);
        r += Wp.rows();
      }
    Wf.push_back(std::move(W));

    const MatX<Scalar>& Rp = Rf.back();
    MatX<Scalar> R(H.state_dim, H.col_dims[l]);
    Index q = 0;
    for (size_t c = 0; c < sys.N.size(); ++c)
      for (int i = 0; i < grid.modes; ++i) {
        R.middleCols(q, Rp.cols()) = (E[i] * sys.N[c]) * Rp;
        q += Rp.cols();
      }
    Rf.push_back(std::move(R));
  }

  MatX<Scalar> D(H.row_total(), H.col_total());
  Index ro = 0;
  for (int k = 0; k < grid.depth; ++k) {
    Index co = 0;
    for (int j = 0; j < grid.depth; ++j) {
      D.block(ro, co, H.row_dims[k], H.col_dims[j]).noalias() = Wf[k] * Rf[j];
      co += H.col_dims[j];
    }
    ro += H.row_dims[k];
  }
  H.dense = std::move(D);
  return H;
}

template <class Scalar>
const MatX<Scalar>& dense_matrix(const HankelMatrixT<Scalar>& H) {
  if (!H.dense)
    throw BudgetExceeded("dense Hankel matrix was not materialized (over budget)");
  return *H.dense;
}

/// Singular values of the assembled operator. Since H = W R factors through
/// the state space, sigma_i(H) = sqrt(lambda_i(O_hat P_hat)) with the total
/// level Grams; this is exact linear algebra, not an approximation, and is
/// how spectra stay reachable far beyond the dense budget. At most state_dim
/// values are nonzero.
template <class Scalar>
VecX<Scalar> hankel_svd(const HankelMatrixT<Scalar>& H) {
  return hankel_singular_values(H.total_reach_gram(), H.total_obs_gram());
}

template <class Scalar>
Scalar hankel_trace_norm(const HankelMatrixT<Scalar>& H) {
  const VecX<Scalar> s = hankel_svd(H);
  return s.size() ? s.sum() : Scalar(0);
}

/// Truncation to blocks with both level indices < k; ambient dimensions are
/// kept (levels >= k are zeroed).
template <class Scalar>
HankelMatrixT<Scalar> truncated_hankel(const HankelMatrixT<Scalar>& H, int k) {
  if (k < 1 || k > H.grid.depth) throw BadOrder("truncation level out of range");
  HankelMatrixT<Scalar> T = H;
  for (int l = k; l < T.grid.depth; ++l) {
    T.obs_gram[l].setZero();
    T.reach_gram[l].setZero();
  }
  if (T.dense) {
    Index ro = 0;
    for (int i = 0; i < T.grid.depth; ++i) {
      Index co = 0;
      for (int j = 0; j < T.grid.depth; ++j) {
        if (i >= k || j >= k)
          T.dense->block(ro, co, T.row_dims[i], T.col_dims[j]).setZero();
        co += T.col_dims[j];
      }
      ro += T.row_dims[i];
    }
  }
  return T;
}

/// ||H - H^(k)||_HS over the represented levels: the squared norm is the sum
/// of tr(obs_gram[i] reach_gram[j]) over pairs outside the k x k level
/// square (||W_i R_j||_F^2 = tr(W_i^T W_i R_j R_j^T)).
template <class Scalar>
Scalar hankel_tail_hs(const HankelMatrixT<Scalar>& H, int k) {
  Scalar acc = 0;
  for (int i = 0; i < H.grid.depth; ++i)
    for (int j = 0; j < H.grid.depth; ++j)
      if (i >= k || j >= k) acc += (H.obs_gram[i] * H.reach_gram[j]).trace();
  return std::sqrt(std::max(acc, Scalar(0)));
}

template <class Scalar>
Scalar hankel_block_frobenius(const HankelMatrixT<Scalar>& H, int k, int j) {
  if (k >= H.grid.depth || j >= H.grid.depth) throw BadOrder("block level out of range");
  return std::sqrt(std::max((H.obs_gram[k] * H.reach_gram[j]).trace(), Scalar(0)));
}

template <class Scalar>
Scalar hankel_hs_norm(const HankelMatrixT<Scalar>& H) {
  return hankel_tail_hs(H, 0);
}

namespace detail {

template <class Scalar>
void check_invariant_subspace(const BilinearSystemT<Scalar>& sys, const MatX<Scalar>& V) {
  if (V.rows() != sys.state_dim() || V.cols() < 1 || V.cols() > sys.state_dim())
    throw DimMismatch("subspace basis has wrong shape");
  const MatX<Scalar> I = MatX<Scalar>::Identity(V.cols(), V.cols());
  if ((V.transpose() * V - I).norm() > Scalar(1e-10))
    throw BadOrder("subspace basis is not orthonormal");
  const MatX<Scalar> Proj =
      MatX<Scalar>::Identity(V.rows(), V.rows()) - V * V.transpose();
  auto leak = [&](const MatX<Scalar>& M) { return (Proj * (M * V)).norm(); };
  if (leak(sys.A) > Scalar(1e-10) * std::max(Scalar(1), Scalar(sys.A.norm())))
    throw NotInvariant("subspace is not A-invariant");
  for (size_t i = 0; i < sys.N.size(); ++i)
    if (leak(sys.N[i]) > Scalar(1e-10) * std::max(Scalar(1), Scalar(sys.N[i].norm())))
      throw NotInvariant("subspace is not invariant under N " + std::to_string(i + 1));
}

}  // namespace detail

/// Hankel operator with the input map replaced by its projection V V^T B
/// onto an A- and N-invariant subspace (columns of V orthonormal).
template <class Scalar>
HankelMatrixT<Scalar> subspace_hankel(const BilinearSystemT<Scalar>& sys,
                                      const FockGridT<Scalar>& grid, const MatX<Scalar>& V,
                                      const HankelOptions& opts = {}) {
  require_valid(sys);
  detail::check_invariant_subspace(sys, V);
  BilinearSystemT<Scalar> proj = sys;
  proj.B = V * (V.transpose() * sys.B);
  return assemble_hankel(proj, grid, opts);
}

template <class Scalar>
struct SubspaceErrorT {
  Scalar trace_norm = 0;
  Scalar hs_norm = 0;
};

/// Norms of H - H_V on the grid. The two operators share the row factors and
/// differ only in the last column-side factor B vs V V^T B, so the
/// difference factors through the state space with (I - V V^T) B and its
/// spectrum again comes from state-size Grams.
template <class Scalar>
SubspaceErrorT<Scalar> subspace_error(const BilinearSystemT<Scalar>& sys,
                                      const FockGridT<Scalar>& grid, const MatX<Scalar>& V) {
  require_valid(sys);
  detail::check_invariant_subspace(sys, V);
  const auto E = laguerre_semigroup_moments(sys.A, grid.a, grid.modes);
  const auto obs = detail::obs_level_grams(sys, E, grid.depth);
  const MatX<Scalar> dB = sys.B - V * (V.transpose() * sys.B);
  const auto reach = detail::reach_level_grams(sys, E, grid.depth, dB);

  MatX<Scalar> Ot = MatX<Scalar>::Zero(sys.state_dim(), sys.state_dim());
  MatX<Scalar> Pt = Ot;
  for (const auto& g : obs) Ot += g;
  for (const auto& g : reach) Pt += g;

  SubspaceErrorT<Scalar> err;
  const VecX<Scalar> s = hankel_singular_values(Pt, Ot);
  err.trace_norm = s.size() ? s.sum() : Scalar(0);
  Scalar acc = 0;
  for (const auto& gi : obs)
    for (const auto& gj : reach) acc += (gi * gj).trace();
  err.hs_norm = std::sqrt(std::max(acc, Scalar(0)));
  return err;
}

/// State-space representer y of the leading right singular vector
/// v = R^T y (so O_hat P_hat y = sigma_1^2 y), normalized to ||v|| = 1 under
/// the reach Gram. Used to track singular-vector convergence across depths.
template <class Scalar>
struct LeadingRightVectorT {
  Scalar sigma = 0;
  VecX<Scalar> y;
};

template <class Scalar>
LeadingRightVectorT<Scalar> leading_right_state(const HankelMatrixT<Scalar>& H) {
  const MatX<Scalar> O = H.total_obs_gram();
  const MatX<Scalar> P = H.total_reach_gram();
  const MatX<Scalar> Lp = factor_psd(P);
  Eigen::SelfAdjointEigenSolver<MatX<Scalar>> es(
      symmetrize(MatX<Scalar>(Lp.transpose() * O * Lp)));
  const Index top = es.eigenvalues().size() - 1;
  const Scalar lam = std::max(es.eigenvalues()(top), Scalar(0));

  LeadingRightVectorT<Scalar> out;
  out.sigma = std::sqrt(lam);
  // z = Lp w is an eigenvector of P O; y = O z is the matching eigenvector
  // of O P.
  VecX<Scalar> y = O * (Lp * es.eigenvectors().col(top));
  const Scalar vnorm = std::sqrt(std::max(Scalar(y.dot(P * y)), Scalar(0)));
  if (!(vnorm > Scalar(0))) throw SolveFailed("degenerate leading singular vector");
  out.y = y / vnorm;
  return out;
}

/// Principal angle between the leading right singular vectors of two grids
/// sharing the Laguerre scale and mode count (depths may differ). Both
/// vectors are restricted to the shared levels and renormalized there, so a
/// deeper grid's extra levels refine the direction rather than register as
/// misalignment; inner products reduce to the shared per-level reach Grams.
template <class Scalar>
Scalar leading_right_angle(const HankelMatrixT<Scalar>& Ha, const HankelMatrixT<Scalar>& Hb) {
  if (Ha.grid.modes != Hb.grid.modes || Ha.grid.a != Hb.grid.a)
    throw DimMismatch("leading_right_angle: grids must share scale and modes");
  const auto va = leading_right_state(Ha);
  const auto vb = leading_right_state(Hb);
  const int shared = std::min(Ha.grid.depth, Hb.grid.depth);
  const auto& levels = Ha.grid.depth <= Hb.grid.depth ? Ha.reach_gram : Hb.reach_gram;
  MatX<Scalar> Pshared = MatX<Scalar>::Zero(Ha.state_dim, Ha.state_dim);
  for (int j = 0; j < shared; ++j) Pshared += levels[j];
  const Scalar ip = va.y.dot(Pshared * vb.y);
  const Scalar na = std::sqrt(std::max(Scalar(va.y.dot(Pshared * va.y)), Scalar(0)));
  const Scalar nb = std::sqrt(std::max(Scalar(vb.y.dot(Pshared * vb.y)), Scalar(0)));
  if (!(na > Scalar(0)) || !(nb > Scalar(0)))
    throw SolveFailed("leading vector vanishes on the shared levels");
  const Scalar c = std::min(std::abs(ip) / (na * nb), Scalar(1));
  return std::acos(c);
}

}  // namespace bilbt
