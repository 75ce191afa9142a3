#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "bilbt/system.hpp"
#include "bilbt/types.hpp"

namespace bilbt {

/// Uniform-grid trajectory: t has steps+1 nodes, x column i is the state at
/// t(i), y column i the output.
template <class Scalar>
struct SimulationTraceT {
  VecX<Scalar> t;
  MatX<Scalar> x;
  MatX<Scalar> y;

  Index nodes() const { return t.size(); }
};

using SimulationTrace = SimulationTraceT<double>;

/// Classical fourth-order Runge-Kutta for
///   x' = A x + sum_i u_i(t) N_i x + B u(t),   y = C x.
/// Reference integrator for everything trajectory-shaped; fixed step keeps
/// runs bit-reproducible.
template <class Scalar, class Derived>
SimulationTraceT<Scalar> integrate_rk4(const BilinearSystemT<Scalar>& sys,
                                       const ControlSignalT<Scalar>& u,
                                       const Eigen::MatrixBase<Derived>& x0, Scalar t_end,
                                       int steps) {
  require_valid(sys);
  if (x0.size() != sys.state_dim()) throw DimMismatch("initial state has wrong size");
  if (u.channels() != sys.input_dim()) throw DimMismatch("control channel count mismatch");
  if (steps < 1 || !(t_end > Scalar(0))) throw BadOrder("need t_end > 0 and steps >= 1");
  const Scalar h = t_end / Scalar(steps);

  auto f = [&](Scalar t, const VecX<Scalar>& x) {
    const VecX<Scalar> ut = u.value(t);
    VecX<Scalar> dx = sys.A * x + sys.B * ut;
    for (Index i = 0; i < Index(sys.N.size()); ++i) dx += ut(i) * (sys.N[i] * x);
    return dx;
  };

  SimulationTraceT<Scalar> tr;
  tr.t.resize(steps + 1);
  tr.x.resize(sys.state_dim(), steps + 1);
  tr.y.resize(sys.output_dim(), steps + 1);
  VecX<Scalar> x = x0;
  for (int k = 0; k <= steps; ++k) {
    const Scalar t = Scalar(k) * h;
    tr.t(k) = t;
    tr.x.col(k) = x;
    tr.y.col(k) = sys.C * x;
    if (k == steps) break;
    const VecX<Scalar> k1 = f(t, x);
    const VecX<Scalar> k2 = f(t + h / 2, x + (h / 2) * k1);
    const VecX<Scalar> k3 = f(t + h / 2, x + (h / 2) * k2);
    const VecX<Scalar> k4 = f(t + h, x + h * k3);
    x += (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return tr;
}

template <class Scalar>
struct VolterraResultT {
  std::vector<SimulationTraceT<Scalar>> terms;  // homogeneous orders 0..order
  SimulationTraceT<Scalar> partial_sum;
};

using VolterraResult = VolterraResultT<double>;

/// Homogeneous Volterra terms of the response:
///   z_0' = A z_0,                    z_0(0) = x0
///   z_1' = A z_1 + sum u_i N_i z_0 + B u,   z_1(0) = 0
///   z_k' = A z_k + sum u_i N_i z_{k-1},     z_k(0) = 0   (k >= 2),
/// so the partial sum over orders 0..K solves the full dynamics up to the
/// dropped order-(K+1) remainder. Each cascade stage is linear with known
/// forcing, stepped by the exponential trapezoid rule
///   z(t+h) = Phi (z + h/2 g(t)) + h/2 g(t+h),   Phi = exp(A h),
/// which treats the stiff homogeneous part exactly.
template <class Scalar, class Derived>
VolterraResultT<Scalar> volterra_series(const BilinearSystemT<Scalar>& sys,
                                        const ControlSignalT<Scalar>& u,
                                        const Eigen::MatrixBase<Derived>& x0, Scalar t_end,
                                        int steps, int order) {
  require_valid(sys);
  if (x0.size() != sys.state_dim()) throw DimMismatch("initial state has wrong size");
  if (u.channels() != sys.input_dim()) throw DimMismatch("control channel count mismatch");
  if (steps < 1 || !(t_end > Scalar(0))) throw BadOrder("need t_end > 0 and steps >= 1");
  if (order < 0) throw BadOrder("volterra order must be >= 0");
  const Scalar h = t_end / Scalar(steps);
  const Index d = sys.state_dim();
  const int nt = steps + 1;

  const MatX<Scalar> Phi = (sys.A * h).exp();
  MatX<Scalar> U(sys.input_dim(), nt);
  for (int k = 0; k < nt; ++k) U.col(k) = u.value(Scalar(k) * h);

  VolterraResultT<Scalar> out;
  out.terms.reserve(order + 1);

  auto blank = [&] {
    SimulationTraceT<Scalar> tr;
    tr.t = VecX<Scalar>::LinSpaced(nt, Scalar(0), t_end);
    tr.x = MatX<Scalar>::Zero(d, nt);
    tr.y.resize(sys.output_dim(), nt);
    return tr;
  };

  // forcing of stage k evaluated from the previous stage's stored samples
  auto forcing = [&](int stage, const MatX<Scalar>& prev, int node) {
    VecX<Scalar> g = VecX<Scalar>::Zero(d);
    if (stage == 0) return g;
    for (Index i = 0; i < Index(sys.N.size()); ++i)
      g += U(i, node) * (sys.N[i] * prev.col(node));
    if (stage == 1) g += sys.B * U.col(node);
    return g;
  };

  for (int stage = 0; stage <= order; ++stage) {
    SimulationTraceT<Scalar> tr = blank();
    const MatX<Scalar>& prev = stage ? out.terms[stage - 1].x : tr.x;
    VecX<Scalar> z = VecX<Scalar>::Zero(d);
    if (stage == 0) z = x0;
    tr.x.col(0) = z;
    for (int k = 0; k < steps; ++k) {
      const VecX<Scalar> g0 = forcing(stage, prev, k);
      const VecX<Scalar> g1 = forcing(stage, prev, k + 1);
      z = Phi * (z + (h / 2) * g0) + (h / 2) * g1;
      tr.x.col(k + 1) = z;
    }
    tr.y = sys.C * tr.x;
    out.terms.push_back(std::move(tr));
  }

  out.partial_sum = blank();
  for (const auto& tr : out.terms) out.partial_sum.x += tr.x;
  out.partial_sum.y = sys.C * out.partial_sum.x;
  return out;
}

/// Geometric ratio governing the Volterra cascade: term k is bounded by a
/// constant times rho^k with rho = M Xi ||u||_{L2,sup} / sqrt(2 nu); the
/// series is summable when rho < 1.
template <class Scalar>
Scalar volterra_contraction(const StabilityCertificateT<Scalar>& cert,
                            const ControlNormsT<Scalar>& norms) {
  return cert.M * cert.Xi * norms.l2_supnorm / std::sqrt(Scalar(2) * cert.nu);
}

/// sup_t of the pointwise Euclidean norm of a trace's output.
template <class Scalar>
Scalar sup_output_norm(const SimulationTraceT<Scalar>& tr) {
  Scalar m = 0;
  for (Index k = 0; k < tr.y.cols(); ++k) m = std::max(m, Scalar(tr.y.col(k).norm()));
  return m;
}

/// sup_t ||y_a(t) - y_b(t)||_2 over the shared grid. Both traces must come
/// from the same time discretization.
template <class Scalar>
Scalar sup_output_error(const SimulationTraceT<Scalar>& a, const SimulationTraceT<Scalar>& b) {
  if (a.t.size() != b.t.size() || a.y.rows() != b.y.rows())
    throw DimMismatch("traces are not comparable");
  if ((a.t - b.t).template lpNorm<Eigen::Infinity>() >
      Scalar(1e-12) * std::max(Scalar(1), Scalar(a.t.size() ? a.t(a.t.size() - 1) : 0)))
    throw DimMismatch("traces use different time grids");
  Scalar m = 0;
  for (Index k = 0; k < a.y.cols(); ++k)
    m = std::max(m, Scalar((a.y.col(k) - b.y.col(k)).norm()));
  return m;
}

/// Convenience: sup-norm output error between a system and its reduction,
/// both started at rest and driven by the same control.
template <class Scalar>
Scalar output_error(const BilinearSystemT<Scalar>& full, const BilinearSystemT<Scalar>& red,
                    const ControlSignalT<Scalar>& u, Scalar t_end, int steps) {
  const VecX<Scalar> xf = VecX<Scalar>::Zero(full.state_dim());
  const VecX<Scalar> xr = VecX<Scalar>::Zero(red.state_dim());
  const SimulationTraceT<Scalar> a = integrate_rk4(full, u, xf, t_end, steps);
  const SimulationTraceT<Scalar> b = integrate_rk4(red, u, xr, t_end, steps);
  return sup_output_error(a, b);
}

}  // namespace bilbt
