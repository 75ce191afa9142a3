#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "bilbt/balancing.hpp"
#include "bilbt/error_bound.hpp"
#include "bilbt/gramians.hpp"
#include "bilbt/volterra.hpp"

namespace bilbt {

enum class NoiseKind { wiener, cpoisson };

/// One scalar noise source. cpoisson is the compensated unit-jump Poisson
/// process with intensity rate; weight() = E M(1)^2 is the coefficient the
/// noise contributes to the mean-square generator.
template <class Scalar>
struct NoiseChannelT {
  NoiseKind kind = NoiseKind::wiener;
  Scalar rate = 1;

  Scalar weight() const { return kind == NoiseKind::wiener ? Scalar(1) : rate; }
};

using NoiseChannel = NoiseChannelT<double>;

/// Ito-type controlled linear SDE
///   dx = (A x + B u) dt + sum_j N_j x dM_j,   y = C x,
/// with one N per noise channel. Control and noise dimensions are
/// independent here, unlike the deterministic bilinear model where the
/// control multiplies the N terms.
template <class Scalar>
struct StochasticModelT {
  MatX<Scalar> A;
  std::vector<MatX<Scalar>> N;
  MatX<Scalar> B;
  MatX<Scalar> C;
  std::vector<NoiseChannelT<Scalar>> noise;

  Index state_dim() const { return A.rows(); }
  Index control_dim() const { return B.cols(); }
  Index output_dim() const { return C.rows(); }
  Index noise_dim() const { return Index(N.size()); }
};

using StochasticModel = StochasticModelT<double>;

template <class Scalar>
void require_valid(const StochasticModelT<Scalar>& m) {
  std::string msg;
  auto add = [&](const std::string& s) {
    if (!msg.empty()) msg += "; ";
    msg += s;
  };
  if (m.A.rows() == 0 || m.A.rows() != m.A.cols()) add("A must be square and nonempty");
  for (size_t j = 0; j < m.N.size(); ++j)
    if (m.N[j].rows() != m.A.rows() || m.N[j].cols() != m.A.cols())
      add("N " + std::to_string(j + 1) + " must match A");
  if (m.B.rows() != m.A.rows()) add("B row count must match A");
  if (m.C.cols() != m.A.cols()) add("C column count must match A");
  if (m.noise.size() != m.N.size()) add("one noise channel per N expected");
  for (size_t j = 0; j < m.noise.size(); ++j)
    if (m.noise[j].kind == NoiseKind::cpoisson && !(m.noise[j].rate > Scalar(0)))
      add("poisson rate " + std::to_string(j + 1) + " must be positive");
  if (!msg.empty()) throw DimMismatch(msg);
}

template <class Scalar>
std::vector<Scalar> noise_weights(const StochasticModelT<Scalar>& m) {
  std::vector<Scalar> w;
  w.reserve(m.noise.size());
  for (const auto& ch : m.noise) w.push_back(ch.weight());
  return w;
}

/// Mean-square generator in the vec basis; its spectral abscissa decides
/// second-moment stability.
template <class Scalar>
MatX<Scalar> ms_generator(const StochasticModelT<Scalar>& m) {
  require_valid(m);
  return kron_generator(m.A, m.N, noise_weights(m));
}

template <class Scalar>
Scalar ms_abscissa(const StochasticModelT<Scalar>& m) {
  return spectral_abscissa(ms_generator(m));
}

template <class Scalar>
bool ms_stable(const StochasticModelT<Scalar>& m) {
  return ms_abscissa(m) < Scalar(0);
}

namespace detail {

/// Weighted generalized Lyapunov solve on raw matrices; shared by the
/// stochastic gramians and the composite trace-norm distance.
template <class Scalar>
GramianPairT<Scalar> generalized_gramians(const MatX<Scalar>& A,
                                          const std::vector<MatX<Scalar>>& N,
                                          const MatX<Scalar>& B, const MatX<Scalar>& C,
                                          const std::vector<Scalar>& weights) {
  const Index k = A.rows();
  const MatX<Scalar> L = kron_generator(A, N, weights);
  const Scalar alpha = spectral_abscissa(L);
  if (!(alpha < Scalar(0)))
    throw NotMSStable("mean-square generator abscissa " + std::to_string(double(alpha)) +
                      " is not negative");
  const MatX<Scalar> BBt = B * B.transpose();
  const MatX<Scalar> CtC = C.transpose() * C;

  GramianPairT<Scalar> g;
  {
    Eigen::PartialPivLU<MatX<Scalar>> lu(L);
    g.P = symmetrize(unvec<Scalar>(lu.solve(-vec(BBt)), k, k));
  }
  {
    Eigen::PartialPivLU<MatX<Scalar>> lu(MatX<Scalar>(L.transpose()));
    g.O = symmetrize(unvec<Scalar>(lu.solve(-vec(CtC)), k, k));
  }
  g.res_P = generalized_residual(A, N, weights, g.P, BBt, false);
  g.res_O = generalized_residual(A, N, weights, g.O, CtC, true);
  if (g.res_P > Scalar(1e-8) || g.res_O > Scalar(1e-8))
    throw SolveFailed("generalized gramian residual above 1e-8 relative");
  return g;
}

}  // namespace detail

template <class Scalar>
GramianPairT<Scalar> stochastic_gramians(const StochasticModelT<Scalar>& m) {
  require_valid(m);
  return detail::generalized_gramians(m.A, m.N, m.B, m.C, noise_weights(m));
}

template <class Scalar>
void require_matched_noise(const StochasticModelT<Scalar>& a, const StochasticModelT<Scalar>& b) {
  if (a.noise.size() != b.noise.size()) throw DimMismatch("noise channel counts differ");
  for (size_t j = 0; j < a.noise.size(); ++j)
    if (a.noise[j].kind != b.noise[j].kind || a.noise[j].rate != b.noise[j].rate)
      throw DimMismatch("noise channel " + std::to_string(j + 1) + " differs between models");
}

/// Trace-norm distance of the stochastic Hankel operators through the
/// composite model (shared noise, stacked states, subtracted outputs).
template <class Scalar>
DeltaHankelT<Scalar> stochastic_delta_hankel(const StochasticModelT<Scalar>& full,
                                             const StochasticModelT<Scalar>& red) {
  require_valid(full);
  require_valid(red);
  require_matched_noise(full, red);
  if (full.control_dim() != red.control_dim() || full.output_dim() != red.output_dim())
    throw DimMismatch("models must share control and output dimensions");

  const Index n = full.state_dim(), r = red.state_dim();
  MatX<Scalar> A = MatX<Scalar>::Zero(n + r, n + r);
  A.topLeftCorner(n, n) = full.A;
  A.bottomRightCorner(r, r) = red.A;
  std::vector<MatX<Scalar>> N;
  for (size_t j = 0; j < full.N.size(); ++j) {
    MatX<Scalar> Nj = MatX<Scalar>::Zero(n + r, n + r);
    Nj.topLeftCorner(n, n) = full.N[j];
    Nj.bottomRightCorner(r, r) = red.N[j];
    N.push_back(std::move(Nj));
  }
  MatX<Scalar> B(n + r, full.control_dim());
  B << full.B, red.B;
  MatX<Scalar> C(full.output_dim(), n + r);
  C << full.C, -red.C;

  DeltaHankelT<Scalar> d;
  d.gram = detail::generalized_gramians(A, N, B, C, noise_weights(full));
  d.sigma = hankel_singular_values(d.gram.P, d.gram.O);
  d.value = d.sigma.size() ? d.sigma.sum() : Scalar(0);
  return d;
}

template <class Scalar>
StochasticModelT<Scalar> transform_model(const StochasticModelT<Scalar>& m,
                                         const MatX<Scalar>& T, const MatX<Scalar>& Tinv) {
  StochasticModelT<Scalar> out = m;
  out.A = T * m.A * Tinv;
  for (size_t j = 0; j < m.N.size(); ++j) out.N[j] = T * m.N[j] * Tinv;
  out.B = T * m.B;
  out.C = m.C * Tinv;
  return out;
}

template <class Scalar>
struct StochasticReductionT {
  StochasticModelT<Scalar> model;
  VecX<Scalar> sigma_kept;
  VecX<Scalar> sigma_discarded;
  MatX<Scalar> T;     // r x n projection onto the balanced leading block
  MatX<Scalar> Tinv;  // n x r right inverse, T Tinv = I_r
};

/// Square-root balanced truncation driven by the stochastic gramian pair.
/// Only the leading r balanced directions are ever formed, so rank-deficient
/// gramians are fine as long as sigma_r is healthy.
template <class Scalar>
StochasticReductionT<Scalar> stochastic_reduce(const StochasticModelT<Scalar>& m, Index r,
                                               bool force = false) {
  require_valid(m);
  const GramianPairT<Scalar> g = stochastic_gramians(m);
  const MatX<Scalar> Lo = factor_psd(g.O);
  const MatX<Scalar> Lp = factor_psd(g.P);
  Eigen::JacobiSVD<MatX<Scalar>> svd(MatX<Scalar>(Lo.transpose() * Lp),
                                     Eigen::ComputeFullU | Eigen::ComputeFullV);
  const VecX<Scalar> s = svd.singularValues();
  const Scalar tol =
      Scalar(m.state_dim()) * std::numeric_limits<Scalar>::epsilon() * (s.size() ? s(0) : 0);
  Index rank = 0;
  while (rank < s.size() && s(rank) > tol) ++rank;
  if (r < 1 || r > rank) throw BadOrder("reduced order must be in [1, rank]");
  if (r < rank && !force && s(r - 1) - s(r) <= Scalar(1e-10) * s(0))
    throw DegenerateCut("cut splits a near-equal singular pair; pass force to override");

  const VecX<Scalar> inv_sqrt = s.head(r).array().sqrt().inverse();
  StochasticReductionT<Scalar> out;
  out.T = inv_sqrt.asDiagonal() * svd.matrixU().leftCols(r).transpose() * Lo.transpose();
  out.Tinv = Lp * svd.matrixV().leftCols(r) * inv_sqrt.asDiagonal();
  out.sigma_kept = s.head(r);
  out.sigma_discarded = s.segment(r, rank - r);
  out.model = transform_model(m, out.T, out.Tinv);
  return out;
}

/// Deterministic per-path random stream: a splitmix64-mixed seed feeds
/// mt19937_64, and uniform/normal/poisson draws avoid std::*_distribution
/// so the stream is identical on every platform.
class PathRng {
 public:
  PathRng(std::uint64_t seed, std::uint64_t stream) {
    const std::uint64_t a = mix(seed);
    const std::uint64_t b = mix(stream ^ 0xD1B54A32D192ED03ULL);
    eng_.seed(mix(a ^ (b * 0x9E3779B97F4A7C15ULL)));
  }

  double uniform() {  // strictly inside (0, 1)
    return (double((eng_() >> 11)) + 0.5) * 0x1.0p-53;
  }

  double gauss() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double th = 2.0 * EIGEN_PI * uniform();
    spare_ = r * std::sin(th);
    has_spare_ = true;
    return r * std::cos(th);
  }

  long poisson(double lambda) {
    const double limit = std::exp(-lambda);
    long k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit && k < 100000);
    return k - 1;
  }

 private:
  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0;
};

/// Centered martingale increments over one path: row j holds the steps
/// increments of channel j. Draw order is fixed (step-major, channel-minor).
template <class Scalar>
MatX<Scalar> martingale_increments(const std::vector<NoiseChannelT<Scalar>>& noise, Scalar h,
                                   int steps, PathRng& rng) {
  MatX<Scalar> dM(Index(noise.size()), steps);
  const Scalar sqh = std::sqrt(h);
  for (int k = 0; k < steps; ++k)
    for (Index j = 0; j < Index(noise.size()); ++j)
      dM(j, k) = noise[j].kind == NoiseKind::wiener
                     ? sqh * Scalar(rng.gauss())
                     : Scalar(rng.poisson(double(noise[j].rate * h))) - noise[j].rate * h;
  return dM;
}

namespace detail {

template <class Scalar>
SimulationTraceT<Scalar> euler_maruyama(const StochasticModelT<Scalar>& m,
                                        const ControlSignalT<Scalar>& u, const VecX<Scalar>& x0,
                                        Scalar t_end, int steps, const MatX<Scalar>& dM) {
  const Scalar h = t_end / Scalar(steps);
  SimulationTraceT<Scalar> tr;
  tr.t = VecX<Scalar>::LinSpaced(steps + 1, Scalar(0), t_end);
  tr.x.resize(m.state_dim(), steps + 1);
  tr.y.resize(m.output_dim(), steps + 1);
  VecX<Scalar> x = x0;
  for (int k = 0; k <= steps; ++k) {
    tr.x.col(k) = x;
    tr.y.col(k) = m.C * x;
    if (k == steps) break;
    VecX<Scalar> drift = m.A * x + m.B * u.value(tr.t(k));
    VecX<Scalar> xn = x + h * drift;
    for (Index j = 0; j < m.noise_dim(); ++j) xn += dM(j, k) * (m.N[j] * x);
    x = xn;
  }
  return tr;
}

}  // namespace detail

/// Euler-Maruyama path of the controlled SDE on a uniform grid.
template <class Scalar, class Derived>
SimulationTraceT<Scalar> simulate_sde(const StochasticModelT<Scalar>& m,
                                      const ControlSignalT<Scalar>& u,
                                      const Eigen::MatrixBase<Derived>& x0, Scalar t_end,
                                      int steps, std::uint64_t seed, std::uint64_t stream = 0) {
  require_valid(m);
  if (x0.size() != m.state_dim()) throw DimMismatch("initial state has wrong size");
  if (u.channels() != m.control_dim()) throw DimMismatch("control channel count mismatch");
  if (steps < 1 || !(t_end > Scalar(0))) throw BadOrder("need t_end > 0 and steps >= 1");
  PathRng rng(seed, stream);
  const VecX<Scalar> start = x0;
  const MatX<Scalar> dM =
      martingale_increments(m.noise, Scalar(t_end / Scalar(steps)), steps, rng);
  return detail::euler_maruyama(m, u, start, t_end, steps, dM);
}

enum class NoiseCoupling { shared, independent };
enum class StochasticBoundMode { mean_lp, sup_mean };

template <class Scalar>
struct StochasticBoundCheckT {
  Scalar estimate = 0;   // Monte-Carlo estimate of the error statistic
  Scalar stderr_ = 0;    // standard error of the estimate
  Scalar bound = 0;      // 2 * delta_tc * control norm
  Scalar delta_tc = 0;
  int paths = 0;
  StochasticBoundMode mode = StochasticBoundMode::mean_lp;
  NoiseCoupling coupling = NoiseCoupling::independent;
  bool ok = false;
};

using StochasticBoundCheck = StochasticBoundCheckT<double>;

/// Monte-Carlo check of the stochastic output-error bounds, both systems
/// started at rest and driven by the same control.
///   mean_lp:  || E(y - y_r) ||_{Lp in time}  vs  2 delta ||u||_{Lp, euclidean}
///             (the mean is a vector per time node; any coupling is valid
///             since only first moments enter)
///   sup_mean: sup_t E ||y(t) - y_r(t)||_2   vs  2 delta sup_t ||u(t)||_2
///             (stated for independent flows)
/// Passing means the estimate stays below the bound with a three-standard-
/// error allowance for sampling noise; the mean_lp stderr propagates the
/// per-node allowance through the Lp norm with full time correlation, which
/// errs on the generous side. Coupling independent (the default, and the
/// hypothesis of the sup_mean statement) draws two streams per path;
/// shared reuses one stream for both systems, the physically meaningful
/// comparison but outside that statement's hypotheses.
template <class Scalar>
StochasticBoundCheckT<Scalar> stochastic_bound_check(
    const StochasticModelT<Scalar>& full, const StochasticModelT<Scalar>& red,
    const ControlSignalT<Scalar>& u, Scalar p, Scalar t_end, int steps, int paths,
    std::uint64_t seed, StochasticBoundMode mode,
    NoiseCoupling coupling = NoiseCoupling::independent) {
  require_valid(full);
  require_valid(red);
  require_matched_noise(full, red);
  if (paths < 2) throw BadOrder("need at least two paths");
  const Scalar h = t_end / Scalar(steps);
  const Index m = full.output_dim();

  StochasticBoundCheckT<Scalar> chk;
  chk.mode = mode;
  chk.coupling = coupling;
  chk.paths = paths;
  chk.delta_tc = stochastic_delta_hankel(full, red).value;
  if (mode == StochasticBoundMode::mean_lp) {
    chk.bound = Scalar(2) * chk.delta_tc * lp_norm_euclid(u, p);
  } else {
    const ControlNormsT<Scalar> n = control_norms(u);
    chk.bound = Scalar(2) * chk.delta_tc * n.linf_eucl;
  }

  // streaming first and second moments of the output gap per time node
  MatX<Scalar> vecsum = MatX<Scalar>::Zero(m, steps + 1);
  VecX<Scalar> normsum = VecX<Scalar>::Zero(steps + 1);
  VecX<Scalar> sqsum = VecX<Scalar>::Zero(steps + 1);
  const VecX<Scalar> x0f = VecX<Scalar>::Zero(full.state_dim());
  const VecX<Scalar> x0r = VecX<Scalar>::Zero(red.state_dim());
  for (int pth = 0; pth < paths; ++pth) {
    MatX<Scalar> dMf, dMr;
    if (coupling == NoiseCoupling::shared) {
      PathRng rng(seed, std::uint64_t(pth));
      dMf = martingale_increments(full.noise, h, steps, rng);
      dMr = dMf;
    } else {
      PathRng rf(seed, 2 * std::uint64_t(pth));
      PathRng rr(seed, 2 * std::uint64_t(pth) + 1);
      dMf = martingale_increments(full.noise, h, steps, rf);
      dMr = martingale_increments(red.noise, h, steps, rr);
    }
    const auto tf = detail::euler_maruyama(full, u, x0f, t_end, steps, dMf);
    const auto tr = detail::euler_maruyama(red, u, x0r, t_end, steps, dMr);
    for (int k = 0; k <= steps; ++k) {
      const VecX<Scalar> gap = tf.y.col(k) - tr.y.col(k);
      vecsum.col(k) += gap;
      const Scalar gn = gap.norm();
      normsum(k) += gn;
      sqsum(k) += gn * gn;
    }
  }

  const Scalar np = Scalar(paths);
  if (mode == StochasticBoundMode::mean_lp) {
    const MatX<Scalar> meanvec = vecsum / np;
    // per-node stderr of the mean vector along any direction is bounded by
    // the total deviation sqrt(E||gap||^2 - ||E gap||^2) / sqrt(paths)
    VecX<Scalar> val(steps + 1), se(steps + 1);
    for (int k = 0; k <= steps; ++k) {
      val(k) = meanvec.col(k).norm();
      const Scalar var = std::max(Scalar(0), sqsum(k) / np - val(k) * val(k));
      se(k) = std::sqrt(var / np);
    }
    const bool inf = !(p > Scalar(0)) || std::isinf(double(p));
    if (inf) {
      Index kstar = 0;
      chk.estimate = val.maxCoeff(&kstar);
      chk.stderr_ = se(kstar);
    } else {
      Scalar acc = (std::pow(val(0), p) + std::pow(val(steps), p)) / Scalar(2);
      for (int k = 1; k < steps; ++k) acc += std::pow(val(k), p);
      chk.estimate = std::pow(acc * h, Scalar(1) / p);
      if (chk.estimate > Scalar(0)) {
        Scalar dacc = (std::pow(val(0), p - 1) * se(0) +
                       std::pow(val(steps), p - 1) * se(steps)) / Scalar(2);
        for (int k = 1; k < steps; ++k) dacc += std::pow(val(k), p - 1) * se(k);
        chk.stderr_ = dacc * h / std::pow(chk.estimate, p - 1);
      } else {
        chk.stderr_ = se.maxCoeff();
      }
    }
  } else {
    VecX<Scalar> meannorm = normsum / np;
    Index kstar = 0;
    chk.estimate = meannorm.maxCoeff(&kstar);
    const Scalar var =
        std::max(Scalar(0), sqsum(kstar) / np - chk.estimate * chk.estimate);
    chk.stderr_ = std::sqrt(var / Scalar(paths - 1));
  }
  chk.ok = chk.estimate <= chk.bound + Scalar(3) * chk.stderr_ + Scalar(1e-12);
  return chk;
}

template <class Scalar>
struct FlowGramianEstimateT {
  Scalar value = 0;
  Scalar stderr_ = 0;
};

using FlowGramianEstimate = FlowGramianEstimateT<double>;

/// Monte-Carlo estimate of the reach quadratic form <x, P x> through the
/// matrix flow: <x, P x> = E int_0^inf ||B^T Phi(t)^T x||^2 dt with Phi the
/// fundamental solution of the homogeneous SDE. The flow is stepped by
/// Euler-Maruyama and the time integral truncated at t_end (pick t_end well
/// past the mean-square decay time).
template <class Scalar, class Derived>
FlowGramianEstimateT<Scalar> flow_gramian_estimate(const StochasticModelT<Scalar>& m,
                                                   const Eigen::MatrixBase<Derived>& probe,
                                                   Scalar t_end, int steps, int paths,
                                                   std::uint64_t seed) {
  require_valid(m);
  const VecX<Scalar> x = probe;
  if (x.size() != m.state_dim()) throw DimMismatch("probe vector has wrong size");
  if (paths < 2) throw BadOrder("need at least two paths");
  const Scalar h = t_end / Scalar(steps);
  const Index d = m.state_dim();

  VecX<Scalar> integrals(paths);
  for (int pth = 0; pth < paths; ++pth) {
    PathRng rng(seed, std::uint64_t(pth));
    const MatX<Scalar> dM = martingale_increments(m.noise, h, steps, rng);
    MatX<Scalar> Z = MatX<Scalar>::Identity(d, d);
    Scalar acc = 0;
    Scalar prev = (m.B.transpose() * x).squaredNorm();  // Phi(0) = I
    for (int k = 0; k < steps; ++k) {
      MatX<Scalar> Zn = Z + h * (m.A * Z);
      for (Index j = 0; j < m.noise_dim(); ++j) Zn += dM(j, k) * (m.N[j] * Z);
      Z = Zn;
      const Scalar cur = (m.B.transpose() * (Z.transpose() * x)).squaredNorm();
      acc += (prev + cur) * h / 2;
      prev = cur;
    }
    integrals(pth) = acc;
  }
  FlowGramianEstimateT<Scalar> est;
  est.value = integrals.mean();
  const Scalar var = (integrals.array() - est.value).square().sum() / Scalar(paths - 1);
  est.stderr_ = std::sqrt(var / Scalar(paths));
  return est;
}

/// Reachability gramian of the mean dynamics on [0, tau], by one block
/// matrix exponential.
template <class Scalar>
MatX<Scalar> finite_horizon_reach_gramian(const MatX<Scalar>& A, const MatX<Scalar>& B,
                                          Scalar tau) {
  if (A.rows() != A.cols() || B.rows() != A.rows()) throw DimMismatch("A square, B matching");
  if (!(tau > Scalar(0))) throw BadOrder("horizon must be positive");
  const Index d = A.rows();
  MatX<Scalar> M = MatX<Scalar>::Zero(2 * d, 2 * d);
  M.topLeftCorner(d, d) = -A;
  M.topRightCorner(d, d) = B * B.transpose();
  M.bottomRightCorner(d, d) = A.transpose();
  const MatX<Scalar> F = (M * tau).exp();
  return symmetrize(
      MatX<Scalar>(F.bottomRightCorner(d, d).transpose() * F.topRightCorner(d, d)));
}

/// Expected output energy gramian on [0, tau] for the unforced SDE:
/// E int_0^tau ||y||^2 dt = <x0, G x0> with vec(G) the integral of
/// exp(L^T t) applied to vec(C^T C), computed through one augmented
/// exponential of size d^2 + 1.
template <class Scalar>
MatX<Scalar> finite_horizon_obs_energy(const StochasticModelT<Scalar>& m, Scalar tau) {
  require_valid(m);
  if (!(tau > Scalar(0))) throw BadOrder("horizon must be positive");
  const Index d = m.state_dim();
  const MatX<Scalar> L = ms_generator(m);
  MatX<Scalar> aug = MatX<Scalar>::Zero(d * d + 1, d * d + 1);
  aug.topLeftCorner(d * d, d * d) = L.transpose();
  aug.block(0, d * d, d * d, 1) = vec<Scalar>(m.C.transpose() * m.C);
  const MatX<Scalar> F = (aug * tau).exp();
  const VecX<Scalar> g = F.block(0, d * d, d * d, 1);
  return symmetrize(unvec<Scalar>(g, d, d));
}

template <class Scalar>
struct SteeringResultT {
  ControlSignalT<Scalar> u;       // sampled minimum-energy control
  Scalar energy = 0;              // squared L2 norm of u
  Scalar range_residual = 0;      // relative defect of the target in range(P_tau)
  SimulationTraceT<Scalar> mean_trace;
  Scalar terminal_error = 0;      // ||mean state at tau - target||
};

using SteeringResult = SteeringResultT<double>;

/// Minimum-energy open-loop control steering the mean from the origin to
/// the target at time tau: u(t) = B^T exp(A^T (tau - t)) P_tau^+ target.
/// The martingale noise leaves the mean dynamics linear, so the steering
/// problem is the classical one; targets outside range(P_tau) throw
/// NotReachable. The returned trace integrates the mean ODE with the
/// sampled control as a cross check.
template <class Scalar, class Derived>
SteeringResultT<Scalar> minimum_energy_steering(const MatX<Scalar>& A, const MatX<Scalar>& B,
                                                const Eigen::MatrixBase<Derived>& target_in,
                                                Scalar tau, int steps) {
  const VecX<Scalar> target = target_in;
  if (target.size() != A.rows()) throw DimMismatch("target has wrong size");
  if (steps < 1) throw BadOrder("need steps >= 1");
  const Index d = A.rows();
  const MatX<Scalar> P = finite_horizon_reach_gramian(A, B, tau);

  Eigen::SelfAdjointEigenSolver<MatX<Scalar>> es(P);
  const VecX<Scalar> ev = es.eigenvalues();
  const Scalar cut = Scalar(d) * std::numeric_limits<Scalar>::epsilon() *
                     std::max(ev.size() ? ev(ev.size() - 1) : Scalar(0), Scalar(1));
  VecX<Scalar> inv = VecX<Scalar>::Zero(d);
  for (Index i = 0; i < d; ++i)
    if (ev(i) > cut) inv(i) = Scalar(1) / ev(i);
  const VecX<Scalar> xi = es.eigenvectors() * (inv.asDiagonal() *
                          (es.eigenvectors().transpose() * target));

  SteeringResultT<Scalar> out;
  const Scalar tnorm = target.norm();
  out.range_residual = tnorm > Scalar(0) ? Scalar((P * xi - target).norm()) / tnorm : Scalar(0);
  if (out.range_residual > Scalar(1e-8))
    throw NotReachable("target lies outside the reachable range on this horizon");
  out.energy = target.dot(xi);

  const Scalar h = tau / Scalar(steps);
  const MatX<Scalar> Psi = (A.transpose() * h).exp();
  MatX<Scalar> samples(B.cols(), steps + 1);
  VecX<Scalar> v = xi;  // v_k = exp(A^T (tau - t_k)) xi, built backward
  samples.col(steps) = B.transpose() * v;
  for (int k = steps - 1; k >= 0; --k) {
    v = Psi * v;
    samples.col(k) = B.transpose() * v;
  }
  out.u.kind = ControlSignalT<Scalar>::Kind::sampled;
  out.u.samples = samples;
  out.u.h = h;

  BilinearSystemT<Scalar> mean;
  mean.A = A;
  mean.B = B;
  mean.C = MatX<Scalar>::Identity(d, d);
  mean.N.assign(size_t(B.cols()), MatX<Scalar>::Zero(d, d));
  const auto tr =
      integrate_rk4(mean, out.u, VecX<Scalar>(VecX<Scalar>::Zero(d)), tau, steps);
  out.terminal_error = (tr.x.col(steps) - target).norm();
  out.mean_trace = tr;
  return out;
}

template <class Scalar, class Derived>
SteeringResultT<Scalar> minimum_energy_steering(const StochasticModelT<Scalar>& m,
                                                const Eigen::MatrixBase<Derived>& target,
                                                Scalar tau, int steps) {
  require_valid(m);
  return minimum_energy_steering(m.A, m.B, target, tau, steps);
}

}  // namespace bilbt
