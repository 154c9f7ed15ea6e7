#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "wpt/errors.hpp"

namespace wpt {

// Fundamental-component gain of a full-bridge stage per unit pulse density,
// 2*sqrt(2)/pi. Relates a dc-side average quantity to the RMS fundamental
// phasor on the ac side.
inline constexpr double kDensityGain = 2.0 * std::numbers::sqrt2 / std::numbers::pi;

/// Physical constants of the series-series compensated link: two resonant
/// branches coupled by a mutual inductance, driven by a PDM full bridge on
/// the transmitter side and loaded by a synchronous PDM rectifier, filter
/// capacitor, and resistive load on the receiver side.
struct SystemParams {
  double L1 = 0.0;       ///< transmitter resonant inductance [H]
  double L2 = 0.0;       ///< receiver resonant inductance [H]
  double C1 = 0.0;       ///< transmitter resonant capacitance [F]
  double C2 = 0.0;       ///< receiver resonant capacitance [F]
  double R1 = 0.0;       ///< transmitter branch ESR [ohm]
  double R2 = 0.0;       ///< receiver branch ESR [ohm]
  double M = 0.0;        ///< mutual inductance [H]
  double Cf = 0.0;       ///< dc filter capacitance [F]
  double RL = 0.0;       ///< load resistance [ohm]
  double omega_s = 0.0;  ///< switching angular frequency [rad/s]
  double V1 = 0.0;       ///< dc input voltage [V]
};

/// Checks positivity and the physical coupling bound M <= sqrt(L1*L2).
/// M == 0 is accepted (uncoupled link). Throws InputError on violation.
inline void validate(const SystemParams& p) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw InputError(std::string("parameter ") + name + " must be strictly positive");
  };
  positive(p.L1, "L1");
  positive(p.L2, "L2");
  positive(p.C1, "C1");
  positive(p.C2, "C2");
  positive(p.R1, "R1");
  positive(p.R2, "R2");
  positive(p.Cf, "Cf");
  positive(p.RL, "RL");
  positive(p.omega_s, "omega_s");
  positive(p.V1, "V1");
  if (!(p.M >= 0.0) || !std::isfinite(p.M))
    throw InputError("parameter M must be nonnegative");
  if (p.M > std::sqrt(p.L1 * p.L2))
    throw InputError("mutual inductance exceeds sqrt(L1*L2)");
}

/// Quantities derived from the physical constants: resonant frequencies,
/// beat frequencies, equivalent inductances of the phasor dynamics, and
/// the coupling reactance omega_s*M.
struct DerivedParams {
  double omega_r1 = 0.0;      ///< 1/sqrt(L1*C1) [rad/s]
  double omega_r2 = 0.0;      ///< 1/sqrt(L2*C2) [rad/s]
  double delta_omega1 = 0.0;  ///< omega_s - omega_r1 [rad/s]
  double delta_omega2 = 0.0;  ///< omega_s - omega_r2 [rad/s]
  double L_w1 = 0.0;          ///< (omega_s + omega_r1)/omega_s * L1 [H]
  double L_w2 = 0.0;          ///< (omega_s + omega_r2)/omega_s * L2 [H]
  double omega_s_M = 0.0;     ///< omega_s * M [ohm]
};

/// Computes DerivedParams from the physical constants.
inline DerivedParams derive(const SystemParams& p) {
  validate(p);
  DerivedParams d;
  d.omega_r1 = 1.0 / std::sqrt(p.L1 * p.C1);
  d.omega_r2 = 1.0 / std::sqrt(p.L2 * p.C2);
  d.delta_omega1 = p.omega_s - d.omega_r1;
  d.delta_omega2 = p.omega_s - d.omega_r2;
  d.L_w1 = (p.omega_s + d.omega_r1) / p.omega_s * p.L1;
  d.L_w2 = (p.omega_s + d.omega_r2) / p.omega_s * p.L2;
  d.omega_s_M = p.omega_s * p.M;
  return d;
}

/// DerivedParams with both beat frequencies forced to zero, as used by the
/// tuned model family: omega_r = omega_s by definition, so L_w = 2L exactly.
inline DerivedParams tuned_idealization(const SystemParams& p) {
  validate(p);
  DerivedParams d;
  d.omega_r1 = p.omega_s;
  d.omega_r2 = p.omega_s;
  d.delta_omega1 = 0.0;
  d.delta_omega2 = 0.0;
  d.L_w1 = 2.0 * p.L1;
  d.L_w2 = 2.0 * p.L2;
  d.omega_s_M = p.omega_s * p.M;
  return d;
}

/// Complex conversion ratios of the inverter (S1) and rectifier (S2),
/// stored as real/imaginary parts. Dimensionless.
struct ConversionRatios {
  double S1r = 0.0;
  double S1i = 0.0;
  double S2r = 0.0;
  double S2i = 0.0;
};

inline void check_density(double d, const char* name) {
  if (!(d >= 0.0 && d <= 1.0))
    throw InputError(std::string("pulse density ") + name + " outside [0, 1]");
}

/// Conversion ratios under the tuned condition: S1 is purely real and S2
/// purely imaginary, both proportional to the pulse density.
inline ConversionRatios conversion_ratios_tuned(double d1, double d2) {
  check_density(d1, "d1");
  check_density(d2, "d2");
  ConversionRatios s;
  s.S1r = kDensityGain * d1;
  s.S1i = 0.0;
  s.S2r = 0.0;
  s.S2i = kDensityGain * d2;
  return s;
}

/// A steady-state operating point of the controllable dynamics.
struct OperatingPoint {
  double d1 = 0.0;    ///< inverter pulse density
  double d2 = 0.0;    ///< rectifier pulse density
  double V1 = 0.0;    ///< dc input voltage [V]
  double IL1r = 0.0;  ///< real part of transmitter current phasor [A RMS]
  double IL2i = 0.0;  ///< imaginary part of receiver current phasor [A RMS]
  double V2 = 0.0;    ///< dc output voltage [V]
};

/// Result of the tuned-condition check: relative detune of each side and
/// whether both are within tolerance. Report-only, never throws.
struct TunedReport {
  double rel_detune1 = 0.0;  ///< |delta_omega1| / omega_s
  double rel_detune2 = 0.0;  ///< |delta_omega2| / omega_s
  double rel_tol = 0.0;
  bool pass = false;
};

/// Checks how far each resonant frequency sits from the switching frequency.
/// Nominal parameter tables are rounded, so the check uses a relative
/// tolerance (default 1%) rather than exact equality.
inline TunedReport validate_tuned(const SystemParams& p, double rel_tol = 0.01) {
  if (!(rel_tol > 0.0)) throw InputError("rel_tol must be positive");
  const DerivedParams d = derive(p);
  TunedReport r;
  r.rel_detune1 = std::abs(d.delta_omega1) / p.omega_s;
  r.rel_detune2 = std::abs(d.delta_omega2) / p.omega_s;
  r.rel_tol = rel_tol;
  r.pass = r.rel_detune1 <= rel_tol && r.rel_detune2 <= rel_tol;
  return r;
}

}  // namespace wpt
