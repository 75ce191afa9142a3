#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "bilbt/balancing.hpp"
#include "bilbt/gramians.hpp"
#include "bilbt/system.hpp"
#include "bilbt/types.hpp"

namespace bilbt {

/// Error system of a full/reduced pair: block-diagonal dynamics, stacked
/// input map and the output difference row C_bar = (C, -C_r). Its Hankel
/// operator is exactly the difference of the two Hankel operators, so trace
/// norms of the difference come from the composite gramians alone.
template <class Scalar>
struct CompositeSystemT {
  BilinearSystemT<Scalar> sys;
  Index dim_full = 0;
  Index dim_red = 0;
};

using CompositeSystem = CompositeSystemT<double>;

template <class Scalar>
CompositeSystemT<Scalar> composite_system(const BilinearSystemT<Scalar>& full,
                                          const BilinearSystemT<Scalar>& red) {
  require_valid(full);
  require_valid(red);
  if (full.input_dim() != red.input_dim() || full.output_dim() != red.output_dim())
    throw DimMismatch("composite_system: input/output dimensions must match");

  const Index kf = full.state_dim(), kr = red.state_dim(), k = kf + kr;
  CompositeSystemT<Scalar> comp;
  comp.dim_full = kf;
  comp.dim_red = kr;

  comp.sys.A = MatX<Scalar>::Zero(k, k);
  comp.sys.A.topLeftCorner(kf, kf) = full.A;
  comp.sys.A.bottomRightCorner(kr, kr) = red.A;
  for (size_t i = 0; i < full.N.size(); ++i) {
    MatX<Scalar> Nb = MatX<Scalar>::Zero(k, k);
    Nb.topLeftCorner(kf, kf) = full.N[i];
    Nb.bottomRightCorner(kr, kr) = red.N[i];
    comp.sys.N.push_back(std::move(Nb));
  }
  comp.sys.B = MatX<Scalar>(k, full.input_dim());
  comp.sys.B.topRows(kf) = full.B;
  comp.sys.B.bottomRows(kr) = red.B;
  comp.sys.C = MatX<Scalar>(full.output_dim(), k);
  comp.sys.C.leftCols(kf) = full.C;
  comp.sys.C.rightCols(kr) = -red.C;
  return comp;
}

template <class Scalar>
struct DeltaHankelT {
  Scalar value = 0;            // trace norm of the Hankel difference
  VecX<Scalar> sigma;          // composite singular values (trimmed)
  GramianPairT<Scalar> gram;   // composite gramian pair
};

using DeltaHankel = DeltaHankelT<double>;

/// Trace norm of the Hankel-operator difference of two systems, evaluated as
/// the sum of composite-system singular values. Weights feed through to the
/// generalized Lyapunov solves (stochastic models reuse this with the noise
/// second-moment weights).
template <class Scalar>
DeltaHankelT<Scalar> delta_hankel_trace_norm(const BilinearSystemT<Scalar>& full,
                                             const BilinearSystemT<Scalar>& red,
                                             const std::vector<Scalar>& weights = {}) {
  const auto comp = composite_system(full, red);
  DeltaHankelT<Scalar> d;
  d.gram = gramian_direct(comp.sys, weights);
  d.sigma = hankel_singular_values(d.gram.P, d.gram.O);
  d.value = d.sigma.sum();
  return d;
}

/// Truncation-error bounds derived from one trace-norm evaluation.
///   bound_transfer     = 4 deltaH            (kernel / transfer family sum)
///   bound_output       = 4 sqrt(n) deltaH ||u||_Linfty(max)   [admissible u]
///   bound_stoch_mean   = 2 deltaH ||u||_Lp(euclid)
///   bound_stoch_sup    = 2 deltaH sup_t ||u(t)||_2
/// Control-dependent fields are absent when no control is supplied, and
/// bound_output additionally requires u inside the admissibility radius of
/// both systems. certificate_ok reports whether the composite system carries
/// a theta < 1 certificate; the bounds themselves only need the gramian
/// solves to succeed.
template <class Scalar>
struct BoundReportT {
  Scalar delta_h_tc = 0;
  Scalar bound_transfer = 0;
  bool certificate_ok = false;
  std::optional<StabilityCertificateT<Scalar>> composite_cert;
  std::optional<Scalar> bound_output;
  std::optional<Scalar> bound_stoch_mean;
  std::optional<Scalar> bound_stoch_sup;
  std::optional<Scalar> control_l2_supnorm;
  std::optional<Scalar> admissibility_radius;
};

using BoundReport = BoundReportT<double>;

template <class Scalar>
BoundReportT<Scalar> bound_report(const BilinearSystemT<Scalar>& full,
                                  const BilinearSystemT<Scalar>& red,
                                  const ControlSignalT<Scalar>* u = nullptr,
                                  Scalar p = std::numeric_limits<Scalar>::infinity()) {
  BoundReportT<Scalar> rep;
  const auto d = delta_hankel_trace_norm(full, red);
  rep.delta_h_tc = d.value;
  rep.bound_transfer = Scalar(4) * d.value;

  try {
    const auto comp = composite_system(full, red);
    rep.composite_cert = stability_certificate(comp.sys);
    rep.certificate_ok = rep.composite_cert->theta < Scalar(1);
  } catch (const NotStable&) {
    rep.certificate_ok = false;
  }

  if (u) {
    const Index n = full.input_dim();
    if (u->channels() != n) throw DimMismatch("bound_report: control channel count");
    const auto norms = control_norms(*u);
    rep.control_l2_supnorm = norms.l2_supnorm;

    // The pointwise output bound assumes the smallness condition for both
    // systems, so the admissibility radius is the smaller of the two.
    Scalar radius = std::numeric_limits<Scalar>::quiet_NaN();
    try {
      const Scalar rf = admissible_threshold(stability_certificate(full), n);
      const Scalar rr = admissible_threshold(stability_certificate(red), n);
      radius = std::min(rf, rr);
    } catch (const NotStable&) {
    }
    rep.admissibility_radius = radius;
    if (std::isfinite(double(radius)) && norms.l2_supnorm < radius)
      rep.bound_output = Scalar(4) * std::sqrt(Scalar(n)) * d.value * norms.linf_max;

    rep.bound_stoch_mean = Scalar(2) * d.value * lp_norm_euclid(*u, p);
    rep.bound_stoch_sup = Scalar(2) * d.value * norms.linf_eucl;
  }
  return rep;
}

}  // namespace bilbt
