#pragma once

#include <cmath>
#include <numbers>

#include "wpt/errors.hpp"
#include "wpt/params.hpp"

namespace wpt {

/// State of the 5th-order dynamic-phasor model. Current phasors use the RMS
/// convention: the instantaneous envelope of iL1(t) is sqrt(2)*|IL1(t)|.
struct PhasorState {
  double IL1r = 0.0;  ///< Re transmitter current phasor [A RMS]
  double IL1i = 0.0;  ///< Im transmitter current phasor [A RMS]
  double IL2r = 0.0;  ///< Re receiver current phasor [A RMS]
  double IL2i = 0.0;  ///< Im receiver current phasor [A RMS]
  double V2 = 0.0;    ///< dc output voltage [V]
};

/// Controllable projection of the tuned model: the states the pulse
/// densities can actually move.
struct ReducedState {
  double IL1r = 0.0;
  double IL2i = 0.0;
  double V2 = 0.0;
};

/// Complementary projection: input-independent, decays to zero.
struct ResidualState {
  double IL1i = 0.0;
  double IL2r = 0.0;
};

namespace detail {

inline void check_finite_state(const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(x[i])) throw NumericsError("non-finite state component");
}

}  // namespace detail

/// General 5th-order phasor dynamics with arbitrary beat frequencies and
/// conversion ratios. The receiver-side dc voltage enters rows 3 and 4
/// through the conversion ratio; the last row is the dc filter balance.
inline PhasorState rhs_full5(const PhasorState& x, const ConversionRatios& s,
                             const DerivedParams& d, const SystemParams& p) {
  const double raw[5] = {x.IL1r, x.IL1i, x.IL2r, x.IL2i, x.V2};
  detail::check_finite_state(raw, 5);
  PhasorState dx;
  dx.IL1r = d.delta_omega1 * x.IL1i - p.R1 / d.L_w1 * x.IL1r + d.omega_s_M / d.L_w1 * x.IL2i +
            s.S1r / d.L_w1 * p.V1;
  dx.IL1i = -d.delta_omega1 * x.IL1r - p.R1 / d.L_w1 * x.IL1i - d.omega_s_M / d.L_w1 * x.IL2r +
            s.S1i / d.L_w1 * p.V1;
  dx.IL2r = d.delta_omega2 * x.IL2i - p.R2 / d.L_w2 * x.IL2r + d.omega_s_M / d.L_w2 * x.IL1i +
            s.S2r / d.L_w2 * x.V2;
  dx.IL2i = -d.delta_omega2 * x.IL2r - p.R2 / d.L_w2 * x.IL2i - d.omega_s_M / d.L_w2 * x.IL1r +
            s.S2i / d.L_w2 * x.V2;
  dx.V2 = -(s.S2r * x.IL2r + s.S2i * x.IL2i) / p.Cf - x.V2 / (p.RL * p.Cf);
  return dx;
}

/// Controllable part of the tuned model: (IL1r, IL2i, V2) driven by d1, d2.
inline ReducedState rhs_reduced3(const ReducedState& x, double d1, double d2,
                                 const SystemParams& p) {
  check_density(d1, "d1");
  check_density(d2, "d2");
  const double raw[3] = {x.IL1r, x.IL2i, x.V2};
  detail::check_finite_state(raw, 3);
  const double wm = p.omega_s * p.M;
  ReducedState dx;
  dx.IL1r = -p.R1 / (2.0 * p.L1) * x.IL1r + wm / (2.0 * p.L1) * x.IL2i +
            std::numbers::sqrt2 / (std::numbers::pi * p.L1) * d1 * p.V1;
  dx.IL2i = -p.R2 / (2.0 * p.L2) * x.IL2i - wm / (2.0 * p.L2) * x.IL1r +
            std::numbers::sqrt2 / (std::numbers::pi * p.L2) * d2 * x.V2;
  dx.V2 = -2.0 * std::numbers::sqrt2 / (std::numbers::pi * p.Cf) * d2 * x.IL2i -
          x.V2 / (p.RL * p.Cf);
  return dx;
}

/// Uncontrollable part of the tuned model: (IL1i, IL2r). No input appears;
/// the origin is a globally stable equilibrium for positive parameters.
inline ResidualState rhs_residual2(const ResidualState& x, const SystemParams& p) {
  const double raw[2] = {x.IL1i, x.IL2r};
  detail::check_finite_state(raw, 2);
  const double wm = p.omega_s * p.M;
  ResidualState dx;
  dx.IL1i = -p.R1 / (2.0 * p.L1) * x.IL1i - wm / (2.0 * p.L1) * x.IL2r;
  dx.IL2r = -p.R2 / (2.0 * p.L2) * x.IL2r + wm / (2.0 * p.L2) * x.IL1i;
  return dx;
}

/// Tuned 5th-order dynamics: the general model specialized to zero beat
/// frequencies and the tuned conversion ratios. Rows (IL1r, IL2i, V2) are
/// exactly the controllable part and rows (IL1i, IL2r) the residual part,
/// evaluated with the same expressions so the decomposition identity holds
/// at machine precision.
inline PhasorState rhs_tuned5(const PhasorState& x, double d1, double d2,
                              const SystemParams& p) {
  const ReducedState dc = rhs_reduced3({x.IL1r, x.IL2i, x.V2}, d1, d2, p);
  const ResidualState dr = rhs_residual2({x.IL1i, x.IL2r}, p);
  PhasorState dx;
  dx.IL1r = dc.IL1r;
  dx.IL1i = dr.IL1i;
  dx.IL2r = dr.IL2r;
  dx.IL2i = dc.IL2i;
  dx.V2 = dc.V2;
  return dx;
}

}  // namespace wpt
