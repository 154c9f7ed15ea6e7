#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "wpt/csv.hpp"
#include "wpt/errors.hpp"
#include "wpt/params.hpp"
#include "wpt/phasor.hpp"
#include "wpt/schedule.hpp"
#include "wpt/trajectory.hpp"

namespace wpt {

// The trajectory must carry at least one sample per microsecond of model
// time, so fixed steps and adaptive step sizes are capped there.
inline constexpr double kMaxSampleInterval = 1e-6;

/// Integrator step selection: a fixed classical 4th-order step (default
/// 0.5 us, deterministic output grid) or an embedded 5(4) pair with error
/// control for equivalence studies.
struct StepControl {
  enum class Mode { fixed, adaptive };
  Mode mode = Mode::fixed;
  double dt = 5e-7;
  double rel_tol = 1e-8;
  double abs_tol = 1e-12;

  static StepControl fixed(double dt) {
    if (!(dt > 0.0) || dt > kMaxSampleInterval)
      throw InputError("fixed step must be in (0, 1e-6] s");
    StepControl sc;
    sc.mode = Mode::fixed;
    sc.dt = dt;
    return sc;
  }

  static StepControl adaptive(double rel_tol = 1e-8, double abs_tol = 1e-12) {
    if (!(rel_tol > 0.0) || !(abs_tol >= 0.0)) throw InputError("invalid adaptive tolerances");
    StepControl sc;
    sc.mode = Mode::adaptive;
    sc.rel_tol = rel_tol;
    sc.abs_tol = abs_tol;
    return sc;
  }
};

namespace detail {

template <std::size_t N, class Rhs>
std::array<double, N> rk4_step(Rhs&& f, const std::array<double, N>& x, double h) {
  std::array<double, N> k1 = f(x);
  std::array<double, N> w;
  for (std::size_t i = 0; i < N; ++i) w[i] = x[i] + 0.5 * h * k1[i];
  std::array<double, N> k2 = f(w);
  for (std::size_t i = 0; i < N; ++i) w[i] = x[i] + 0.5 * h * k2[i];
  std::array<double, N> k3 = f(w);
  for (std::size_t i = 0; i < N; ++i) w[i] = x[i] + h * k3[i];
  std::array<double, N> k4 = f(w);
  std::array<double, N> out;
  for (std::size_t i = 0; i < N; ++i)
    out[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
  return out;
}

// One Dormand-Prince 5(4) trial step: returns the 5th-order solution and
// the embedded error estimate.
template <std::size_t N, class Rhs>
void dopri_step(Rhs&& f, const std::array<double, N>& x, double h,
                std::array<double, N>& x5, std::array<double, N>& err) {
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                          e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                          e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;

  std::array<double, N> w;
  const std::array<double, N> k1 = f(x);
  for (std::size_t i = 0; i < N; ++i) w[i] = x[i] + h * a21 * k1[i];
  const std::array<double, N> k2 = f(w);
  for (std::size_t i = 0; i < N; ++i) w[i] = x[i] + h * (a31 * k1[i] + a32 * k2[i]);
  const std::array<double, N> k3 = f(w);
  for (std::size_t i = 0; i < N; ++i) w[i] = x[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
  const std::array<double, N> k4 = f(w);
  for (std::size_t i = 0; i < N; ++i)
    w[i] = x[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
  const std::array<double, N> k5 = f(w);
  for (std::size_t i = 0; i < N; ++i)
    w[i] = x[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
  const std::array<double, N> k6 = f(w);
  for (std::size_t i = 0; i < N; ++i)
    x5[i] = x[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
  const std::array<double, N> k7 = f(x5);
  for (std::size_t i = 0; i < N; ++i)
    err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
}

template <std::size_t N>
bool all_finite(const std::array<double, N>& x) {
  for (double v : x)
    if (!std::isfinite(v)) return false;
  return true;
}

[[noreturn]] inline void abort_nonfinite(double t) {
  throw NumericsError("non-finite state at t = " + format_sig9(t) + " s");
}

}  // namespace detail

/// Integrates dx/dt = rhs(x, d1, d2) over a piecewise-constant schedule.
/// Integration restarts exactly at each breakpoint so density steps are not
/// smeared across a step. Every accepted step is recorded.
template <std::size_t N, class Rhs>
Trajectory integrate_schedule(Rhs&& rhs, const std::array<double, N>& x0,
                              const ControlSchedule& sched, double t_end, const StepControl& sc,
                              std::vector<std::string> columns) {
  if (!(t_end > 0.0)) throw InputError("t_end must be positive");
  Trajectory traj(std::move(columns));
  std::array<double, N> x = x0;
  traj.push_row(0.0, std::span<const double>(x.data(), N));

  // Segment boundaries: schedule breakpoints inside (0, t_end), then t_end.
  std::vector<double> cuts;
  for (const auto& p : sched.points())
    if (p.t > 0.0 && p.t < t_end) cuts.push_back(p.t);
  cuts.push_back(t_end);

  double seg_start = 0.0;
  for (double seg_end : cuts) {
    const auto [d1, d2] = sched.densities_at(seg_start);
    auto f = [&](const std::array<double, N>& s) { return rhs(s, d1, d2); };
    const double seg = seg_end - seg_start;

    if (sc.mode == StepControl::Mode::fixed) {
      const auto n = static_cast<std::size_t>(std::ceil(seg / sc.dt - 1e-9));
      const double h = seg / static_cast<double>(n);
      for (std::size_t k = 1; k <= n; ++k) {
        const double t = (k == n) ? seg_end : seg_start + static_cast<double>(k) * h;
        // The model rhs rejects non-finite inputs; annotate such failures
        // with the step that produced them.
        try {
          x = detail::rk4_step(f, x, h);
        } catch (const NumericsError&) {
          detail::abort_nonfinite(t);
        }
        if (!detail::all_finite(x)) detail::abort_nonfinite(t);
        traj.push_row(t, std::span<const double>(x.data(), N));
      }
    } else {
      double t = seg_start;
      double h = std::min(kMaxSampleInterval, seg);
      while (t < seg_end) {
        h = std::min(h, seg_end - t);
        std::array<double, N> x5, err;
        // A trial stage overflowing counts as a failed step: reject it and
        // let the controller shrink h (the step-floor check below aborts
        // with the time if no step size recovers).
        bool trial_ok = true;
        try {
          detail::dopri_step(f, x, h, x5, err);
        } catch (const NumericsError&) {
          trial_ok = false;
        }
        double err_norm = 0.0;
        if (!trial_ok || !detail::all_finite(x5)) {
          err_norm = std::numeric_limits<double>::infinity();
        } else {
          for (std::size_t i = 0; i < N; ++i) {
            const double scale = sc.abs_tol + sc.rel_tol * std::max(std::abs(x[i]), std::abs(x5[i]));
            err_norm = std::max(err_norm, std::abs(err[i]) / scale);
          }
        }
        if (err_norm <= 1.0) {
          t = (seg_end - t <= h * (1.0 + 1e-12)) ? seg_end : t + h;
          x = x5;
          if (!detail::all_finite(x)) detail::abort_nonfinite(t);
          traj.push_row(t, std::span<const double>(x.data(), N));
        }
        const double factor = (err_norm > 0.0) ? 0.9 * std::pow(err_norm, -0.2) : 5.0;
        h *= std::clamp(factor, 0.2, 5.0);
        h = std::min(h, kMaxSampleInterval);
        if (h < 1e-18) detail::abort_nonfinite(t);
      }
    }
    seg_start = seg_end;
  }
  return traj;
}

enum class PhasorModel { full5, tuned5, reduced3, residual2 };

inline std::size_t model_order(PhasorModel m) {
  switch (m) {
    case PhasorModel::full5:
    case PhasorModel::tuned5:
      return 5;
    case PhasorModel::reduced3:
      return 3;
    case PhasorModel::residual2:
      return 2;
  }
  throw InputError("unknown model");
}

inline std::vector<std::string> model_columns(PhasorModel m) {
  switch (m) {
    case PhasorModel::full5:
    case PhasorModel::tuned5:
      return {"IL1r_A", "IL1i_A", "IL2r_A", "IL2i_A", "V2_V"};
    case PhasorModel::reduced3:
      return {"IL1r_A", "IL2i_A", "V2_V"};
    case PhasorModel::residual2:
      return {"IL1i_A", "IL2r_A"};
  }
  throw InputError("unknown model");
}

/// Integrates one of the phasor models over a schedule. The general model
/// uses the physical beat frequencies from derive(); the tuned family sets
/// them to zero by definition. Conversion ratios follow the tuned mapping
/// of the pulse densities in either case.
inline Trajectory integrate(PhasorModel model, std::span<const double> x0,
                            const SystemParams& p, const ControlSchedule& sched, double t_end,
                            const StepControl& sc = StepControl{}) {
  validate(p);
  if (x0.size() != model_order(model))
    throw InputError("initial state dimension does not match model order");
  switch (model) {
    case PhasorModel::full5: {
      const DerivedParams d = derive(p);
      auto rhs = [&p, d](const std::array<double, 5>& s, double d1, double d2) {
        const PhasorState st{s[0], s[1], s[2], s[3], s[4]};
        const PhasorState dx = rhs_full5(st, conversion_ratios_tuned(d1, d2), d, p);
        return std::array<double, 5>{dx.IL1r, dx.IL1i, dx.IL2r, dx.IL2i, dx.V2};
      };
      std::array<double, 5> x{x0[0], x0[1], x0[2], x0[3], x0[4]};
      return integrate_schedule(rhs, x, sched, t_end, sc, model_columns(model));
    }
    case PhasorModel::tuned5: {
      auto rhs = [&p](const std::array<double, 5>& s, double d1, double d2) {
        const PhasorState dx = rhs_tuned5({s[0], s[1], s[2], s[3], s[4]}, d1, d2, p);
        return std::array<double, 5>{dx.IL1r, dx.IL1i, dx.IL2r, dx.IL2i, dx.V2};
      };
      std::array<double, 5> x{x0[0], x0[1], x0[2], x0[3], x0[4]};
      return integrate_schedule(rhs, x, sched, t_end, sc, model_columns(model));
    }
    case PhasorModel::reduced3: {
      auto rhs = [&p](const std::array<double, 3>& s, double d1, double d2) {
        const ReducedState dx = rhs_reduced3({s[0], s[1], s[2]}, d1, d2, p);
        return std::array<double, 3>{dx.IL1r, dx.IL2i, dx.V2};
      };
      std::array<double, 3> x{x0[0], x0[1], x0[2]};
      return integrate_schedule(rhs, x, sched, t_end, sc, model_columns(model));
    }
    case PhasorModel::residual2: {
      auto rhs = [&p](const std::array<double, 2>& s, double, double) {
        const ResidualState dx = rhs_residual2({s[0], s[1]}, p);
        return std::array<double, 2>{dx.IL1i, dx.IL2r};
      };
      std::array<double, 2> x{x0[0], x0[1]};
      return integrate_schedule(rhs, x, sched, t_end, sc, model_columns(model));
    }
  }
  throw InputError("unknown model");
}

}  // namespace wpt
