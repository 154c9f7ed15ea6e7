#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "wpt/analysis.hpp"
#include "wpt/errors.hpp"
#include "wpt/integrate.hpp"
#include "wpt/params.hpp"
#include "wpt/schedule.hpp"
#include "wpt/switched.hpp"
#include "wpt/trajectory.hpp"

namespace wpt {

/// Carrier envelope sampled once per switching cycle (window centers).
/// Amplitude is the peak value in the waveform's units; phase is relative
/// to the cos(omega_s t) reference.
struct Envelope {
  std::vector<double> t;          ///< s
  std::vector<double> amplitude;  ///< >= 0
  std::vector<double> phase;      ///< rad

  Trajectory to_trajectory() const {
    Trajectory traj({"amp", "phase_rad"});
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double row[2] = {amplitude[i], phase[i]};
      traj.push_row(t[i], std::span<const double>(row, 2));
    }
    return traj;
  }
};

namespace detail {

/// Validates a uniform sample grid against the carrier period and returns
/// the number of samples per period (>= 64 required; full-period windows
/// must line up with the grid so the demodulation rejects the 2nd
/// harmonic exactly).
inline std::size_t samples_per_period(std::span<const double> t, double omega_s) {
  if (!(omega_s > 0.0)) throw InputError("omega_s must be positive");
  if (t.size() < 2) throw InputError("waveform too short");
  const double dt = t[1] - t[0];
  if (!(dt > 0.0)) throw InputError("time column must be strictly increasing");
  const double Ts = 2.0 * std::numbers::pi / omega_s;
  for (std::size_t k = 1; k + 1 < t.size(); ++k)
    if (std::abs((t[k + 1] - t[k]) - dt) > 1e-6 * Ts)
      throw InputError("envelope extraction requires a uniform sample grid");
  const double per = Ts / dt;
  const auto n = static_cast<std::size_t>(std::llround(per));
  if (n < 64) throw InputError("need at least 64 samples per switching period");
  if (std::abs(per - static_cast<double>(n)) > 1e-3 * static_cast<double>(n))
    throw InputError("sample interval must divide the switching period");
  if (t.size() < 2 * n) throw InputError("waveform must span at least two switching periods");
  return n;
}

}  // namespace detail

/// Quadrature demodulation with one-period rectangular averaging: the
/// waveform is multiplied by cos and sin at the carrier, each product is
/// averaged over one full period, and the pair is read as an I/Q sample.
/// Full-period averages reject the double-frequency image and all even
/// harmonics exactly, which makes the method robust to PDM amplitude
/// dither between active and freewheeling cycles.
inline Envelope extract_envelope(std::span<const double> t, std::span<const double> x,
                                 double omega_s) {
  if (t.size() != x.size()) throw InputError("time and value columns differ in length");
  const std::size_t n = detail::samples_per_period(t, omega_s);
  Envelope env;
  const std::size_t cycles = t.size() / n;
  env.t.reserve(cycles);
  env.amplitude.reserve(cycles);
  env.phase.reserve(cycles);
  for (std::size_t c = 0; c < cycles; ++c) {
    const std::size_t lo = c * n;
    double i_avg = 0.0, q_avg = 0.0;
    for (std::size_t k = lo; k < lo + n; ++k) {
      i_avg += x[k] * std::cos(omega_s * t[k]);
      q_avg += x[k] * std::sin(omega_s * t[k]);
    }
    i_avg /= static_cast<double>(n);
    q_avg /= static_cast<double>(n);
    env.t.push_back(0.5 * (t[lo] + t[lo + n - 1]));
    env.amplitude.push_back(2.0 * std::hypot(i_avg, q_avg));
    env.phase.push_back(std::atan2(-q_avg, i_avg));
  }
  return env;
}

inline Envelope extract_envelope(const Trajectory& traj, const std::string& column,
                                 double omega_s) {
  return extract_envelope(traj.times(), traj.column(column), omega_s);
}

/// Per-cycle mean of a waveform on the same windows extract_envelope
/// uses; the natural reduction for dc-side quantities like v2.
struct CycleAverage {
  std::vector<double> t;
  std::vector<double> mean;
};

inline CycleAverage cycle_average(std::span<const double> t, std::span<const double> x,
                                  double omega_s) {
  if (t.size() != x.size()) throw InputError("time and value columns differ in length");
  const std::size_t n = detail::samples_per_period(t, omega_s);
  CycleAverage out;
  const std::size_t cycles = t.size() / n;
  for (std::size_t c = 0; c < cycles; ++c) {
    const std::size_t lo = c * n;
    double acc = 0.0;
    for (std::size_t k = lo; k < lo + n; ++k) acc += x[k];
    out.t.push_back(0.5 * (t[lo] + t[lo + n - 1]));
    out.mean.push_back(acc / static_cast<double>(n));
  }
  return out;
}

inline CycleAverage cycle_average(const Trajectory& traj, const std::string& column,
                                  double omega_s) {
  return cycle_average(traj.times(), traj.column(column), omega_s);
}

/// Builds the cycle-latched sine-injection schedule d(t) = d0 + a*sin(2*pi*f*t)
/// on the stepped input. Densities can only change once per switching
/// cycle, so the sine is sampled at each cycle start — both the simulator
/// and the measurement's reference channel see the same staircase.
inline ControlSchedule sine_schedule(double d1_0, double d2_0, ControlInput input,
                                     double amplitude, double f_Hz, double t_end,
                                     double omega_s) {
  check_density(d1_0, "d1");
  check_density(d2_0, "d2");
  const double d0 = (input == ControlInput::d1) ? d1_0 : d2_0;
  if (!(amplitude >= 0.0) || d0 + amplitude > 1.0 || d0 - amplitude < 0.0)
    throw InputError("injection amplitude drives the density outside [0, 1]");
  if (!(f_Hz > 0.0)) throw InputError("injection frequency must be positive");
  const double Ts = 2.0 * std::numbers::pi / omega_s;
  std::vector<SchedulePoint> pts;
  pts.reserve(static_cast<std::size_t>(t_end / Ts) + 2);
  for (double tk = 0.0; tk < t_end; tk += Ts) {
    const double d = d0 + amplitude * std::sin(2.0 * std::numbers::pi * f_Hz * tk);
    SchedulePoint pt;
    pt.t = tk;
    pt.d1 = (input == ControlInput::d1) ? d : d1_0;
    pt.d2 = (input == ControlInput::d2) ? d : d2_0;
    pts.push_back(pt);
  }
  return ControlSchedule(std::move(pts));
}

enum class ResponseSystem { reduced3, switched };

struct FrequencyResponseOptions {
  double amplitude = 0.02;        ///< injected density amplitude
  std::size_t min_periods = 10;   ///< injection periods in the window
  double switched_dt = 0.0;       ///< oracle step request; 0 = default
};

namespace detail {

/// Complex correlation of a sampled signal against exp(-j*2*pi*f*t) over
/// a window; the window mean is removed first so the large dc component
/// cannot leak into the estimate. For x = a*sin(2*pi*f*t) this returns
/// -j*a (peak-valued phasor in the cos reference).
inline std::complex<double> correlate_tone(std::span<const double> t,
                                           std::span<const double> x, double f_Hz,
                                           std::size_t lo, std::size_t hi) {
  const auto n = static_cast<double>(hi - lo);
  double mean = 0.0;
  for (std::size_t k = lo; k < hi; ++k) mean += x[k];
  mean /= n;
  std::complex<double> acc{0.0, 0.0};
  const double w = 2.0 * std::numbers::pi * f_Hz;
  for (std::size_t k = lo; k < hi; ++k)
    acc += (x[k] - mean) * std::complex<double>(std::cos(w * t[k]), -std::sin(w * t[k]));
  return 2.0 / n * acc;
}

/// Exact continuous-time correlation of a piecewise-constant signal
/// against exp(-j*2*pi*f*t) over the window [w0, w1). Hold k spans
/// [edges[k], edges[k+1]) with value[k]; the window mean is removed and
/// the scale matches correlate_tone (value[k] = sin sampled per hold
/// converges on -j as the holds shrink). Discrete left-point sums over a
/// staircase misplace each hold's centroid by half a sample, which reads
/// as a spurious delay proportional to frequency; the closed-form
/// integral has no such bias.
inline std::complex<double> correlate_tone_holds(std::span<const double> edges,
                                                 std::span<const double> value, double f_Hz,
                                                 double w0, double w1) {
  if (edges.size() != value.size() + 1 || value.empty())
    throw InputError("piecewise-constant correlation needs n holds and n+1 edges");
  if (!(w1 > w0)) throw InputError("correlation window is empty");
  const double span = w1 - w0;
  double mean = 0.0;
  for (std::size_t k = 0; k < value.size(); ++k) {
    const double a = std::max(edges[k], w0);
    const double b = std::min(edges[k + 1], w1);
    if (b > a) mean += value[k] * (b - a);
  }
  mean /= span;
  const double w = 2.0 * std::numbers::pi * f_Hz;
  const std::complex<double> jw{0.0, w};
  std::complex<double> acc{0.0, 0.0};
  for (std::size_t k = 0; k < value.size(); ++k) {
    const double a = std::max(edges[k], w0);
    const double b = std::min(edges[k + 1], w1);
    if (b <= a) continue;
    const std::complex<double> ea{std::cos(w * a), -std::sin(w * a)};
    const std::complex<double> eb{std::cos(w * b), -std::sin(w * b)};
    acc += (value[k] - mean) * (ea - eb) / jw;
  }
  return 2.0 / span * acc;
}

}  // namespace detail

/// Measures the V2-over-density frequency response by sine injection:
/// simulate with the cycle-latched sine schedule, discard a settling
/// interval of max(5/|Re lambda_slowest|, 2/f) rounded up to whole
/// injection periods, then correlate V2 against the tone over
/// >= min_periods whole periods and divide by the exact fundamental of
/// the piecewise-constant drive over the same window. Referencing the
/// drive rather than the ideal sine cancels the staircase's
/// zero-order-hold rolloff and delay. For the switched oracle the
/// reference is the realized gate sequence, not the commanded density:
/// the pulse-density modulator only fires when its accumulator crosses
/// the threshold, so at small amplitudes it delivers a measurably weaker
/// tone than commanded, and dividing by the command would bias the gain
/// low. A settling check compares successive per-period means of V2 and
/// reports when they still drift by more than 1%.
inline std::complex<double> measure_frequency_response(
    ResponseSystem system, ControlInput input, double f_Hz, const SystemParams& p, double d1,
    double d2, const FrequencyResponseOptions& opts = {}) {
  validate(p);
  if (!(f_Hz > 0.0)) throw InputError("injection frequency must be positive");
  const double fs = p.omega_s / (2.0 * std::numbers::pi);
  if (f_Hz >= 0.5 * fs)
    throw InputError("injection frequency must stay below half the switching frequency");
  if (opts.min_periods < 2) throw InputError("need at least 2 measurement periods");
  if (!(opts.amplitude > 0.0)) throw InputError("injection amplitude must be positive");

  const OperatingPoint op = steady_state(p, d1, d2);
  const LtiModel lti = linearize(p, op);

  // Slowest controllable pole sets how long transients persist.
  double slow = std::numeric_limits<double>::infinity();
  const Eigen::VectorXcd ev = detail::sorted_eigenvalues(lti.A);
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    slow = std::min(slow, std::abs(ev(i).real()));
  if (!(slow > 0.0)) throw NumericsError("operating point is not asymptotically stable");

  const double settle = std::max(5.0 / slow, 2.0 / f_Hz);
  const auto settle_periods = static_cast<std::size_t>(std::ceil(settle * f_Hz));
  const std::size_t total_periods = settle_periods + opts.min_periods;
  const double t_end = static_cast<double>(total_periods) / f_Hz;

  const ControlSchedule sched =
      sine_schedule(d1, d2, input, opts.amplitude, f_Hz, t_end, p.omega_s);

  std::vector<PdmCycle> pdm_log;
  const Trajectory traj = [&]() -> Trajectory {
    if (system == ResponseSystem::reduced3) {
      const std::array<double, 3> x0{op.IL1r, op.IL2i, op.V2};
      return integrate(PhasorModel::reduced3, std::span<const double>(x0.data(), x0.size()), p,
                       sched, t_end);
    }
    SwitchedOptions sw;
    sw.dt = opts.switched_dt;
    sw.x0 = circuit_state_from_phasors(p, op.IL1r, op.IL2i, op.V2);
    sw.pdm_log = &pdm_log;
    return simulate_switched(p, sched, t_end, sw);
  }();

  const std::vector<double>& t = traj.times();
  const std::vector<double> y =
      traj.column(system == ResponseSystem::switched ? "v2_V" : "V2_V");

  // Window bounds: whole injection periods, measured from the settling
  // cutoff to the end of the run.
  const double t_meas = static_cast<double>(settle_periods) / f_Hz;
  std::size_t lo = 0;
  while (lo < t.size() && t[lo] < t_meas) ++lo;
  const std::size_t hi = t.size();
  if (hi - lo < 16) throw NumericsError("measurement window is empty");

  // The drive the plant actually received, as hold intervals: the
  // commanded staircase for the averaged model, the realized per-cycle
  // gate stream for the switched oracle (an active cycle delivers
  // density 1, a freewheeling cycle density 0).
  std::vector<double> edges;
  std::vector<double> level;
  if (system == ResponseSystem::reduced3) {
    const auto& pts = sched.points();
    edges.reserve(pts.size() + 1);
    level.reserve(pts.size());
    for (const auto& pt : pts) {
      edges.push_back(pt.t);
      level.push_back((input == ControlInput::d1) ? pt.d1 : pt.d2);
    }
  } else {
    edges.reserve(pdm_log.size() + 1);
    level.reserve(pdm_log.size());
    for (const auto& c : pdm_log) {
      edges.push_back(c.t);
      const bool active = (input == ControlInput::d1) ? c.inverter_active : c.rectifier_active;
      level.push_back(active ? 1.0 : 0.0);
    }
  }
  if (level.empty()) throw NumericsError("drive log is empty");

  // Settling check: successive per-period means of the output must agree.
  {
    std::vector<double> means;
    const double Tp = 1.0 / f_Hz;
    std::size_t k = lo;
    for (std::size_t period = 0; period < opts.min_periods; ++period) {
      const double stop = t_meas + static_cast<double>(period + 1) * Tp;
      double acc = 0.0;
      std::size_t cnt = 0;
      while (k < hi && t[k] < stop) {
        acc += y[k];
        ++k;
        ++cnt;
      }
      if (cnt > 0) means.push_back(acc / static_cast<double>(cnt));
    }
    for (std::size_t i = 1; i < means.size(); ++i) {
      const double ref = std::max(std::abs(means[0]), 1e-12);
      if (std::abs(means[i] - means[i - 1]) > 0.01 * ref)
        throw NumericsError("output has not settled: period means drift by more than 1%");
    }
  }

  // Continuous-time window matching the sample cells of the discrete sum.
  const double dt_tail = t[hi - 1] - t[hi - 2];
  const double w0 = t[lo];
  const double w1 = t[hi - 1] + dt_tail;
  edges.push_back(std::max(w1, edges.back()) + 1.0);  // last hold runs past the window

  const std::complex<double> py = detail::correlate_tone(t, y, f_Hz, lo, hi);
  const std::complex<double> pd = detail::correlate_tone_holds(edges, level, f_Hz, w0, w1);
  if (std::abs(pd) < 0.1 * opts.amplitude)
    throw NumericsError("injected tone not found in the reference channel");
  return py / pd;
}

/// Log-spaced frequency grid, endpoints included.
inline std::vector<double> log_spaced(double fmin, double fmax, std::size_t points) {
  if (!(fmin > 0.0) || !(fmax > fmin)) throw InputError("need 0 < fmin < fmax");
  if (points < 2) throw InputError("need at least 2 frequency points");
  std::vector<double> f(points);
  const double l0 = std::log10(fmin), l1 = std::log10(fmax);
  for (std::size_t i = 0; i < points; ++i)
    f[i] = std::pow(10.0, l0 + (l1 - l0) * static_cast<double>(i) /
                              static_cast<double>(points - 1));
  f.front() = fmin;
  f.back() = fmax;
  return f;
}

}  // namespace wpt
