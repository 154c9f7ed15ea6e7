#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "wpt/csv.hpp"
#include "wpt/errors.hpp"
#include "wpt/params.hpp"
#include "wpt/schedule.hpp"
#include "wpt/trajectory.hpp"

namespace wpt {

/// First-order sigma-delta accumulator that turns a pulse density d in
/// [0, 1] into a cycle-by-cycle on/off decision. Over any window of n
/// cycles the realized on-fraction differs from d by less than 1/n.
class PdmAccumulator {
 public:
  /// Advances one carrier cycle at density `d`; returns true when the
  /// cycle is active. The small tolerance absorbs accumulation rounding
  /// for densities that are not exact binary fractions.
  bool advance(double d) {
    if (!(d >= 0.0 && d <= 1.0)) throw InputError("pulse density must lie in [0, 1]");
    acc_ += d;
    if (acc_ >= 1.0 - 1e-9) {
      acc_ -= 1.0;
      return true;
    }
    return false;
  }

  double residual() const { return acc_; }

 private:
  double acc_ = 0.0;
};

/// Expands a density into its first n on/off cycle decisions.
inline std::vector<bool> pdm_pattern(double d, std::size_t n) {
  if (!(d >= 0.0 && d <= 1.0)) throw InputError("pulse density must lie in [0, 1]");
  PdmAccumulator acc;  // re-validates d; the early check covers n == 0 too
  std::vector<bool> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = acc.advance(d);
  return out;
}

/// Full-bridge output during an active carrier cycle: a square wave in
/// phase with cos(omega_s t). Inactive cycles clamp the bridge to zero.
inline double inverter_voltage(double t, bool active, double V1, double omega_s) {
  if (!active) return 0.0;
  return (std::cos(omega_s * t) >= 0.0) ? V1 : -V1;
}

/// Synchronous rectifier seen from the secondary loop: when active it
/// presents the dc-side voltage with the polarity of iL2 and feeds |iL2|
/// into the dc bus; inactive cycles short the secondary instead.
struct RectifierAction {
  double u2 = 0.0;      ///< voltage inserted in the secondary loop [V]
  double i_rect = 0.0;  ///< current delivered to the dc bus [A]
};

inline RectifierAction rectifier_voltage(double iL2, double v2, bool active) {
  if (!active) return {0.0, 0.0};
  const double s = (iL2 >= 0.0) ? 1.0 : -1.0;
  return {-s * v2, std::abs(iL2)};
}

/// Options for the cycle-accurate simulation. `dt` is a request; the
/// realized step divides the carrier period exactly so cycle boundaries
/// land on step boundaries. dt = 0 asks for the default Ts/512.
/// Modulator decisions actually taken for one carrier cycle.
struct PdmCycle {
  double t = 0.0;               ///< cycle start time [s]
  bool inverter_active = false;
  bool rectifier_active = false;
};

struct SwitchedOptions {
  double dt = 0.0;
  std::size_t record_every = 1;
  std::array<double, 5> x0{0.0, 0.0, 0.0, 0.0, 0.0};  ///< iL1, vC1, iL2, vC2, v2
  /// When set, receives one entry per carrier cycle with the gate
  /// decisions the modulators realized. The quantizers absorb part of a
  /// commanded density change until their accumulators cross the firing
  /// threshold, so measurements that need the delivered (rather than the
  /// commanded) pulse density must read it from this log.
  std::vector<PdmCycle>* pdm_log = nullptr;
};

namespace detail {

/// Circuit derivative with frozen switch commands. The two loop equations
/// couple through the mutual inductance, so each evaluation solves the
/// 2x2 inductance matrix.
struct SwitchedRhs {
  const SystemParams& p;
  double u1;
  bool rect_active;

  std::array<double, 5> operator()(const std::array<double, 5>& x) const {
    const double iL1 = x[0], vC1 = x[1], iL2 = x[2], vC2 = x[3], v2 = x[4];
    const auto [u2, i_rect] = rectifier_voltage(iL2, v2, rect_active);
    const double rhs1 = u1 - vC1 - p.R1 * iL1;
    const double rhs2 = u2 - vC2 - p.R2 * iL2;
    const double det = p.L1 * p.L2 - p.M * p.M;
    return {
        (p.L2 * rhs1 - p.M * rhs2) / det,
        iL1 / p.C1,
        (p.L1 * rhs2 - p.M * rhs1) / det,
        iL2 / p.C2,
        (i_rect - v2 / p.RL) / p.Cf,
    };
  }
};

}  // namespace detail

/// Runs the switched model and hands every recorded sample to `cb` as
/// cb(t, state, u1, u2). Density changes in the schedule take effect at
/// the next carrier-cycle boundary, matching how the modulators latch
/// their decision once per cycle.
template <class Callback>
void simulate_switched_steps(const SystemParams& p, const ControlSchedule& sched, double t_end,
                             const SwitchedOptions& opts, Callback&& cb) {
  validate(p);
  if (!(t_end > 0.0)) throw InputError("t_end must be positive");
  if (p.M * p.M >= p.L1 * p.L2)
    throw InputError("coupling must satisfy M^2 < L1*L2 for the switched model");
  if (opts.record_every == 0) throw InputError("record_every must be >= 1");

  const double Ts = 2.0 * std::numbers::pi / p.omega_s;
  const double dt_req = (opts.dt > 0.0) ? opts.dt : Ts / 512.0;
  if (dt_req > Ts / 128.0)
    throw InputError("switched step must resolve the carrier: dt <= Ts/128");
  const auto steps_per_cycle = static_cast<std::size_t>(std::ceil(Ts / dt_req - 1e-9));
  const double h = Ts / static_cast<double>(steps_per_cycle);
  const auto n_steps = static_cast<std::size_t>(std::ceil(t_end / h - 1e-9));

  std::array<double, 5> x = opts.x0;
  PdmAccumulator acc1, acc2;
  bool act1 = false, act2 = false;

  auto emit = [&](std::size_t k, double t) {
    const double u1 = inverter_voltage(t, act1, p.V1, p.omega_s);
    const double u2 = rectifier_voltage(x[2], x[4], act2).u2;
    if (k % opts.record_every == 0) cb(t, x, u1, u2);
  };

  for (std::size_t k = 0; k < n_steps; ++k) {
    if (k % steps_per_cycle == 0) {
      const double t_cycle = static_cast<double>(k) * h;
      const auto [d1, d2] = sched.densities_at(t_cycle);
      act1 = acc1.advance(d1);
      act2 = acc2.advance(d2);
      if (opts.pdm_log) opts.pdm_log->push_back({t_cycle, act1, act2});
    }
    if (k == 0) emit(0, 0.0);

    const double t0 = static_cast<double>(k) * h;
    // Classical 4th-order step; the bridge voltage is re-evaluated at
    // the substage times, the switch activity is frozen for the cycle.
    detail::SwitchedRhs f0{p, inverter_voltage(t0, act1, p.V1, p.omega_s), act2};
    detail::SwitchedRhs fm{p, inverter_voltage(t0 + 0.5 * h, act1, p.V1, p.omega_s), act2};
    detail::SwitchedRhs f1{p, inverter_voltage(t0 + h, act1, p.V1, p.omega_s), act2};

    const std::array<double, 5> k1 = f0(x);
    std::array<double, 5> w;
    for (std::size_t i = 0; i < 5; ++i) w[i] = x[i] + 0.5 * h * k1[i];
    const std::array<double, 5> k2 = fm(w);
    for (std::size_t i = 0; i < 5; ++i) w[i] = x[i] + 0.5 * h * k2[i];
    const std::array<double, 5> k3 = fm(w);
    for (std::size_t i = 0; i < 5; ++i) w[i] = x[i] + h * k3[i];
    const std::array<double, 5> k4 = f1(w);
    for (std::size_t i = 0; i < 5; ++i)
      x[i] += h / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);

    const double t = static_cast<double>(k + 1) * h;
    for (double v : x)
      if (!std::isfinite(v))
        throw NumericsError("non-finite state at t = " + format_sig9(t) + " s");
    emit(k + 1, t);
  }
}

/// Switched-model waveform columns, matching the waveform CSV layout.
inline std::vector<std::string> switched_columns() {
  return {"iL1_A", "vC1_V", "iL2_A", "vC2_V", "v2_V", "u1_V", "u2_V"};
}

/// Runs the switched model and collects the recorded samples, including
/// the commanded bridge and rectifier voltages, into a trajectory.
inline Trajectory simulate_switched(const SystemParams& p, const ControlSchedule& sched,
                                    double t_end, const SwitchedOptions& opts = {}) {
  Trajectory traj(switched_columns());
  simulate_switched_steps(p, sched, t_end, opts,
                          [&](double t, const std::array<double, 5>& x, double u1, double u2) {
                            const std::array<double, 7> row{x[0], x[1], x[2], x[3],
                                                            x[4], u1,   u2};
                            traj.push_row(t, std::span<const double>(row.data(), row.size()));
                          });
  return traj;
}

/// Time-averaged power terms over the samples with t >= t_start. On a
/// uniform grid spanning whole carrier cycles the averages close the
/// energy balance: input = R1 and R2 losses + load power (the reactive
/// elements average out).
struct PowerAudit {
  double input = 0.0;   ///< mean u1*iL1 [W]
  double loss1 = 0.0;   ///< mean R1*iL1^2 [W]
  double loss2 = 0.0;   ///< mean R2*iL2^2 [W]
  double output = 0.0;  ///< mean v2^2/RL [W]
};

inline PowerAudit power_audit(const Trajectory& traj, const SystemParams& p,
                              double t_start = 0.0) {
  const std::size_t c_iL1 = traj.column_index("iL1_A");
  const std::size_t c_iL2 = traj.column_index("iL2_A");
  const std::size_t c_v2 = traj.column_index("v2_V");
  const std::size_t c_u1 = traj.column_index("u1_V");
  PowerAudit audit;
  std::size_t n = 0;
  for (std::size_t r = 0; r < traj.rows(); ++r) {
    if (traj.time(r) < t_start) continue;
    const double iL1 = traj.value(r, c_iL1);
    const double iL2 = traj.value(r, c_iL2);
    const double v2 = traj.value(r, c_v2);
    audit.input += traj.value(r, c_u1) * iL1;
    audit.loss1 += p.R1 * iL1 * iL1;
    audit.loss2 += p.R2 * iL2 * iL2;
    audit.output += v2 * v2 / p.RL;
    ++n;
  }
  if (n == 0) throw InputError("power audit window contains no samples");
  const double inv = 1.0 / static_cast<double>(n);
  audit.input *= inv;
  audit.loss1 *= inv;
  audit.loss2 *= inv;
  audit.output *= inv;
  return audit;
}

/// Instantaneous circuit state consistent with a tuned operating point:
/// the primary current peaks at t = 0 (cos reference), the secondary
/// current is in quadrature, and the capacitor voltages lag their
/// currents by 90 degrees. Converts rms phasor components to the
/// switched-model state [iL1, vC1, iL2, vC2, v2].
inline std::array<double, 5> circuit_state_from_phasors(const SystemParams& p, double IL1r,
                                                        double IL2i, double V2) {
  const double s2 = std::numbers::sqrt2;
  return {s2 * IL1r, 0.0, 0.0, s2 * IL2i / (p.omega_s * p.C2), V2};
}

}  // namespace wpt
