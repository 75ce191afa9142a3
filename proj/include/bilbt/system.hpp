#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "bilbt/lyapunov.hpp"
#include "bilbt/types.hpp"

namespace bilbt {

/// State-space data of the bilinear control system
///   x'(t) = A x(t) + sum_i u_i(t) N_i x(t) + B u(t),   y(t) = C x(t),
/// with one N per input channel. k states, n inputs, m outputs.
template <class Scalar>
struct BilinearSystemT {
  MatX<Scalar> A;
  std::vector<MatX<Scalar>> N;
  MatX<Scalar> B;
  MatX<Scalar> C;

  Index state_dim() const { return A.rows(); }
  Index input_dim() const { return B.cols(); }
  Index output_dim() const { return C.rows(); }
};

using BilinearSystem = BilinearSystemT<double>;

struct Violation {
  std::string field;
  std::string message;
};

template <class Scalar>
std::vector<Violation> validate_system(const BilinearSystemT<Scalar>& sys) {
  std::vector<Violation> out;
  const Index k = sys.A.rows();
  if (k == 0) out.push_back({"A", "state dimension is zero"});
  if (sys.A.cols() != k) out.push_back({"A", "A is not square"});
  if (sys.B.rows() != k)
    out.push_back({"B", "B has " + std::to_string(sys.B.rows()) +
                            " rows, expected " + std::to_string(k)});
  if (sys.B.cols() == 0) out.push_back({"B", "input dimension is zero"});
  if (sys.C.cols() != k)
    out.push_back({"C", "C has " + std::to_string(sys.C.cols()) +
                            " cols, expected " + std::to_string(k)});
  if (sys.C.rows() == 0) out.push_back({"C", "output dimension is zero"});
  if (static_cast<Index>(sys.N.size()) != sys.B.cols())
    out.push_back({"N", "expected one N per input channel (" +
                            std::to_string(sys.B.cols()) + "), got " +
                            std::to_string(sys.N.size())});
  for (size_t i = 0; i < sys.N.size(); ++i)
    if (sys.N[i].rows() != k || sys.N[i].cols() != k)
      out.push_back({"N", "N " + std::to_string(i + 1) + " is not " +
                              std::to_string(k) + "x" + std::to_string(k)});
  const bool finite = sys.A.allFinite() && sys.B.allFinite() && sys.C.allFinite() &&
                      std::all_of(sys.N.begin(), sys.N.end(),
                                  [](const MatX<Scalar>& n) { return n.allFinite(); });
  if (!finite) out.push_back({"entries", "non-finite entry"});
  return out;
}

template <class Scalar>
void require_valid(const BilinearSystemT<Scalar>& sys) {
  const auto v = validate_system(sys);
  if (v.empty()) return;
  std::string msg = "invalid system:";
  for (const auto& item : v) msg += " [" + item.field + "] " + item.message + ";";
  throw DimMismatch(msg);
}

enum class CertMethod { log_norm, grid_estimate };

/// Exponential stability certificate ||exp(At)|| <= M exp(-nu t) together
/// with the coupling constants Gamma = sqrt(sum ||N_i N_i^T||),
/// Xi = sum ||N_i|| and theta = M^2 Gamma^2 / (2 nu). theta < 1 is the
/// smallness condition every series-type result below relies on.
template <class Scalar>
struct StabilityCertificateT {
  Scalar M = 1;
  Scalar nu = 0;
  Scalar Gamma = 0;
  Scalar Xi = 0;
  Scalar theta = 0;
  CertMethod method = CertMethod::log_norm;
};

using StabilityCertificate = StabilityCertificateT<double>;

/// Certificate construction. Canonical route: if the log norm
/// mu = lambda_max((A + A^T)/2) is negative, then M = 1, nu = -mu is exact.
/// Otherwise fall back to nu = |spectral abscissa| (1 - 1e-3) and estimate
/// M as the sup of ||exp(At)|| exp(nu t) over a logarithmic time grid wide
/// enough to cover polynomial transients. Throws NotStable if the spectral
/// abscissa is not negative.
template <class Scalar>
StabilityCertificateT<Scalar> stability_certificate(const BilinearSystemT<Scalar>& sys) {
  require_valid(sys);
  StabilityCertificateT<Scalar> cert;

  const Scalar alpha = spectral_abscissa(sys.A);
  if (!(alpha < Scalar(0)))
    throw NotStable("spectral abscissa " + std::to_string(double(alpha)) + " is not negative");

  Scalar gamma_sq = 0, xi = 0;
  for (const auto& Ni : sys.N) {
    const Scalar s = operator_norm(Ni);
    gamma_sq += s * s;  // ||N N^T|| = ||N||^2 in spectral norm
    xi += s;
  }
  cert.Gamma = std::sqrt(gamma_sq);
  cert.Xi = xi;

  Eigen::SelfAdjointEigenSolver<MatX<Scalar>> sym(symmetrize(sys.A));
  const Scalar mu = sym.eigenvalues().maxCoeff();
  if (mu < Scalar(0)) {
    cert.method = CertMethod::log_norm;
    cert.M = 1;
    cert.nu = -mu;
  } else {
    cert.method = CertMethod::grid_estimate;
    cert.nu = -alpha * (Scalar(1) - Scalar(1e-3));
    // Transients of a k x k system decay like t^(k-1) exp(alpha t); with the
    // 1e-3 margin the peak of ||exp(At)|| exp(nu t) can sit near
    // (k-1)/(1e-3 |alpha|), so the grid has to reach that far out.
    const Scalar k = Scalar(sys.state_dim());
    const Scalar t_lo = Scalar(1e-4) / -alpha;
    const Scalar t_hi = std::max(Scalar(200), Scalar(4000) * k) / -alpha;
    const int points = 600;
    Scalar m_best = 1;
    for (int i = 0; i < points; ++i) {
      const Scalar f = Scalar(i) / Scalar(points - 1);
      const Scalar t = t_lo * std::pow(t_hi / t_lo, f);
      const MatX<Scalar> E = (sys.A * t).exp();
      m_best = std::max(m_best, operator_norm(E) * std::exp(cert.nu * t));
    }
    cert.M = m_best;
  }
  cert.theta = cert.M * cert.M * gamma_sq / (Scalar(2) * cert.nu);
  return cert;
}

/// Control signal on [0, infinity). Either a named analytic family with
/// closed-form norms or uniform samples on [0, steps*h] (linearly
/// interpolated, zero beyond the grid).
template <class Scalar>
struct ControlSignalT {
  enum class Kind { decaying_exp, windowed_const, sampled };

  Kind kind = Kind::decaying_exp;
  // decaying_exp: u(t) = amplitude * exp(-rate t), rate > 0
  // windowed_const: u(t) = amplitude on [t0, t1), zero elsewhere
  VecX<Scalar> amplitude;
  Scalar rate = 1;
  Scalar t0 = 0;
  Scalar t1 = 0;
  // sampled: column j holds u(j h)
  MatX<Scalar> samples;
  Scalar h = 0;

  Index channels() const {
    return kind == Kind::sampled ? samples.rows() : amplitude.size();
  }

  VecX<Scalar> value(Scalar t) const {
    switch (kind) {
      case Kind::decaying_exp:
        return amplitude * std::exp(-rate * t);
      case Kind::windowed_const:
        return (t >= t0 && t < t1) ? amplitude
                                   : VecX<Scalar>::Zero(amplitude.size()).eval();
      case Kind::sampled: {
        if (t < 0 || samples.cols() == 0) return VecX<Scalar>::Zero(samples.rows());
        const Scalar pos = t / h;
        const Index j = static_cast<Index>(std::floor(pos));
        if (j >= samples.cols() - 1) {
          return pos <= Scalar(samples.cols() - 1)
                     ? VecX<Scalar>(samples.col(samples.cols() - 1))
                     : VecX<Scalar>(VecX<Scalar>::Zero(samples.rows()));
        }
        const Scalar w = pos - Scalar(j);
        return samples.col(j) * (Scalar(1) - w) + samples.col(j + 1) * w;
      }
    }
    return {};
  }

  static ControlSignalT zero(Index n) {
    ControlSignalT u;
    u.kind = Kind::windowed_const;
    u.amplitude = VecX<Scalar>::Zero(n);
    u.t0 = u.t1 = 0;
    return u;
  }
};

using ControlSignal = ControlSignalT<double>;

/// Norms used by the error bounds. l2_supnorm is the L^2 norm in time of
/// t -> max_i |u_i(t)| (the admissibility norm); linf_max its sup in time;
/// linf_eucl the sup in time of the Euclidean norm ||u(t)||_2.
template <class Scalar>
struct ControlNormsT {
  Scalar l2_supnorm = 0;
  Scalar linf_max = 0;
  Scalar linf_eucl = 0;
};

using ControlNorms = ControlNormsT<double>;

namespace detail {

// Composite trapezoid of f(t)^2 on the sample grid; f given per column.
template <class Scalar>
Scalar l2_from_samples(const VecX<Scalar>& f, Scalar h) {
  if (f.size() < 2) return 0;
  Scalar acc = (f(0) * f(0) + f(f.size() - 1) * f(f.size() - 1)) / Scalar(2);
  for (Index j = 1; j + 1 < f.size(); ++j) acc += f(j) * f(j);
  return std::sqrt(acc * h);
}

}  // namespace detail

template <class Scalar>
ControlNormsT<Scalar> control_norms(const ControlSignalT<Scalar>& u) {
  using Kind = typename ControlSignalT<Scalar>::Kind;
  ControlNormsT<Scalar> n;
  switch (u.kind) {
    case Kind::decaying_exp: {
      if (!(u.rate > Scalar(0))) throw BadOrder("decaying_exp control needs rate > 0");
      const Scalar amax = u.amplitude.cwiseAbs().maxCoeff();
      n.linf_max = amax;
      n.linf_eucl = u.amplitude.norm();
      n.l2_supnorm = amax / std::sqrt(Scalar(2) * u.rate);
      break;
    }
    case Kind::windowed_const: {
      const Scalar amax = u.amplitude.size() ? u.amplitude.cwiseAbs().maxCoeff() : Scalar(0);
      const Scalar len = std::max(Scalar(0), u.t1 - u.t0);
      n.linf_max = len > 0 ? amax : Scalar(0);
      n.linf_eucl = len > 0 ? u.amplitude.norm() : Scalar(0);
      n.l2_supnorm = amax * std::sqrt(len);
      break;
    }
    case Kind::sampled: {
      VecX<Scalar> supcurve(u.samples.cols());
      for (Index j = 0; j < u.samples.cols(); ++j)
        supcurve(j) = u.samples.col(j).cwiseAbs().maxCoeff();
      n.linf_max = supcurve.size() ? supcurve.maxCoeff() : Scalar(0);
      Scalar e = 0;
      for (Index j = 0; j < u.samples.cols(); ++j)
        e = std::max(e, u.samples.col(j).norm());
      n.linf_eucl = e;
      n.l2_supnorm = detail::l2_from_samples(supcurve, u.h);
      break;
    }
  }
  return n;
}

/// L^p norm in time of ||u(t)||_2 (p = infinity via p <= 0).
template <class Scalar>
Scalar lp_norm_euclid(const ControlSignalT<Scalar>& u, Scalar p) {
  using Kind = typename ControlSignalT<Scalar>::Kind;
  const bool inf = !(p > Scalar(0)) || std::isinf(double(p));
  switch (u.kind) {
    case Kind::decaying_exp: {
      const Scalar a = u.amplitude.norm();
      return inf ? a : a * std::pow(p * u.rate, -Scalar(1) / p);
    }
    case Kind::windowed_const: {
      const Scalar len = std::max(Scalar(0), u.t1 - u.t0);
      const Scalar a = len > 0 ? u.amplitude.norm() : Scalar(0);
      return inf ? a : a * std::pow(len, Scalar(1) / p);
    }
    case Kind::sampled: {
      if (u.samples.cols() < 2) return 0;
      VecX<Scalar> g(u.samples.cols());
      for (Index j = 0; j < u.samples.cols(); ++j) g(j) = u.samples.col(j).norm();
      if (inf) return g.maxCoeff();
      Scalar acc = (std::pow(g(0), p) + std::pow(g(g.size() - 1), p)) / Scalar(2);
      for (Index j = 1; j + 1 < g.size(); ++j) acc += std::pow(g(j), p);
      return std::pow(acc * u.h, Scalar(1) / p);
    }
  }
  return 0;
}

/// Admissibility radius min(1/sqrt(n), sqrt(2 nu)/(M Xi)) for the
/// L^2((0,inf),(R^n,||.||_inf)) norm of the control. Xi = 0 (linear system)
/// leaves only the dimensional term.
template <class Scalar>
Scalar admissible_threshold(const StabilityCertificateT<Scalar>& cert, Index n_inputs) {
  const Scalar dim_term = Scalar(1) / std::sqrt(Scalar(n_inputs));
  if (cert.Xi <= Scalar(0)) return dim_term;
  return std::min(dim_term, std::sqrt(Scalar(2) * cert.nu) / (cert.M * cert.Xi));
}

}  // namespace bilbt
