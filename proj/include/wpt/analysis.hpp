#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "wpt/errors.hpp"
#include "wpt/integrate.hpp"
#include "wpt/params.hpp"
#include "wpt/phasor.hpp"
#include "wpt/schedule.hpp"
#include "wpt/trajectory.hpp"

namespace wpt {

/// Closed-form equilibrium of the controllable subsystem for constant
/// densities. The three balance equations are linear in (IL1r, IL2i, V2)
/// once the densities are fixed, so the solution is exact:
///   V2   = -RL*k2*IL2i
///   IL2i = -omega_s*M*IL1r / (R2 + RL*k2^2)
///   IL1r =  k1*V1 / (R1 + (omega_s*M)^2 / (R2 + RL*k2^2))
/// with k = (2*sqrt(2)/pi)*d.
inline OperatingPoint steady_state(const SystemParams& p, double d1, double d2) {
  validate(p);
  check_density(d1, "d1");
  check_density(d2, "d2");
  const double k1 = kDensityGain * d1;
  const double k2 = kDensityGain * d2;
  const double wm = p.omega_s * p.M;
  const double Req = p.R2 + p.RL * k2 * k2;
  const double den = p.R1 + wm * wm / Req;
  if (!(Req > 0.0) || !(den > 0.0))
    throw NumericsError("steady-state system is singular for these parameters");
  OperatingPoint op;
  op.d1 = d1;
  op.d2 = d2;
  op.V1 = p.V1;
  op.IL1r = k1 * p.V1 / den;
  op.IL2i = -wm * op.IL1r / Req;
  op.V2 = -p.RL * k2 * op.IL2i;
  return op;
}

/// Selects which pulse density acts as the input channel.
enum class ControlInput { d1, d2 };

/// Small-signal model of the controllable subsystem about an operating
/// point: x_hat' = A*x_hat + B*[d1_hat, d2_hat]^T, y = C*x_hat with
/// x_hat = (IL1r, IL2i, V2) deviations and y the V2 deviation.
struct LtiModel {
  Eigen::Matrix3d A;
  Eigen::Matrix<double, 3, 2> B;
  Eigen::Matrix<double, 1, 3> C;
  OperatingPoint op;
};

namespace detail {

/// Relative residual of the balance equations at a claimed operating
/// point, scaled row-wise by the magnitudes of the balancing terms so the
/// test is meaningful across parameter scales.
inline double equilibrium_residual(const SystemParams& p, const OperatingPoint& op) {
  const ReducedState dx = rhs_reduced3({op.IL1r, op.IL2i, op.V2}, op.d1, op.d2, p);
  const double wm = p.omega_s * p.M;
  const double s2pi = std::numbers::sqrt2 / std::numbers::pi;
  const double scale1 = std::abs(p.R1 / (2.0 * p.L1) * op.IL1r) +
                        std::abs(wm / (2.0 * p.L1) * op.IL2i) +
                        std::abs(s2pi / p.L1 * op.d1 * op.V1);
  const double scale2 = std::abs(p.R2 / (2.0 * p.L2) * op.IL2i) +
                        std::abs(wm / (2.0 * p.L2) * op.IL1r) +
                        std::abs(s2pi / p.L2 * op.d2 * op.V2);
  const double scale3 =
      std::abs(2.0 * s2pi / p.Cf * op.d2 * op.IL2i) + std::abs(op.V2 / (p.RL * p.Cf));
  double rel = 0.0;
  rel = std::max(rel, std::abs(dx.IL1r) / std::max(scale1, 1e-300));
  rel = std::max(rel, std::abs(dx.IL2i) / std::max(scale2, 1e-300));
  rel = std::max(rel, std::abs(dx.V2) / std::max(scale3, 1e-300));
  return rel;
}

}  // namespace detail

/// Linearizes the controllable subsystem about `op`. The Jacobians are
/// written out symbolically; `op` must actually balance the equations
/// (relative residual <= 1e-6) or the request is rejected.
inline LtiModel linearize(const SystemParams& p, const OperatingPoint& op) {
  validate(p);
  check_density(op.d1, "d1");
  check_density(op.d2, "d2");
  if (detail::equilibrium_residual(p, op) > 1e-6)
    throw InputError("operating point does not balance the steady-state equations");

  const double wm = p.omega_s * p.M;
  const double s2pi = std::numbers::sqrt2 / std::numbers::pi;
  LtiModel m;
  m.op = op;
  m.A << -p.R1 / (2.0 * p.L1), wm / (2.0 * p.L1), 0.0,            //
      -wm / (2.0 * p.L2), -p.R2 / (2.0 * p.L2), s2pi * op.d2 / p.L2,  //
      0.0, -2.0 * s2pi * op.d2 / p.Cf, -1.0 / (p.RL * p.Cf);
  m.B << s2pi * op.V1 / p.L1, 0.0,  //
      0.0, s2pi * op.V2 / p.L2,     //
      0.0, -2.0 * s2pi * op.IL2i / p.Cf;
  m.C << 0.0, 0.0, 1.0;
  return m;
}

/// Evaluates the transfer function V2_hat/d_hat at s = j*omega by a
/// direct complex solve of (j*omega*I - A) x = B_col. omega = 0 gives the
/// dc gain. A singular resolvent (omega at an undamped pole) is reported
/// rather than returning NaN.
inline std::complex<double> transfer_function(const LtiModel& m, ControlInput input,
                                              double omega) {
  if (!(omega >= 0.0) || !std::isfinite(omega))
    throw InputError("omega must be finite and non-negative");
  const int col = (input == ControlInput::d1) ? 0 : 1;
  Eigen::Matrix3cd resolvent = -m.A.cast<std::complex<double>>();
  for (int i = 0; i < 3; ++i) resolvent(i, i) += std::complex<double>(0.0, omega);
  Eigen::FullPivLU<Eigen::Matrix3cd> lu(resolvent);
  if (!lu.isInvertible())
    throw NumericsError("resolvent singular at omega = " + format_sig9(omega) + " rad/s");
  const Eigen::Vector3cd x = lu.solve(m.B.col(col).cast<std::complex<double>>());
  return (m.C.cast<std::complex<double>>() * x)(0, 0);
}

inline std::complex<double> dc_gain(const LtiModel& m, ControlInput input) {
  return transfer_function(m, input, 0.0);
}

inline double magnitude_db(std::complex<double> g) { return 20.0 * std::log10(std::abs(g)); }

inline double phase_deg(std::complex<double> g) {
  return std::arg(g) * 180.0 / std::numbers::pi;
}

/// Linearization of the complete tuned 5th-order model, states ordered
/// (IL1r, IL1i, IL2r, IL2i, V2), inputs (d1_hat, d2_hat). The quadrature
/// pair (IL1i, IL2r) receives no input by construction, which is what the
/// controllability decomposition below makes quantitative.
struct Lti5 {
  Eigen::Matrix<double, 5, 5> A;
  Eigen::Matrix<double, 5, 2> B;
  OperatingPoint op;
};

inline Lti5 tuned5_linearization(const SystemParams& p, const OperatingPoint& op) {
  const LtiModel m3 = linearize(p, op);  // validates p and op
  const double wm = p.omega_s * p.M;
  Lti5 m;
  m.op = op;
  m.A.setZero();
  m.B.setZero();
  // Controllable rows, embedded at (IL1r, IL2i, V2) = indices (0, 3, 4).
  const int map[3] = {0, 3, 4};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m.A(map[r], map[c]) = m3.A(r, c);
    m.B(map[r], 0) = m3.B(r, 0);
    m.B(map[r], 1) = m3.B(r, 1);
  }
  // Quadrature rows (IL1i, IL2r) = indices (1, 2): autonomous pair.
  m.A(1, 1) = -p.R1 / (2.0 * p.L1);
  m.A(1, 2) = -wm / (2.0 * p.L1);
  m.A(2, 1) = wm / (2.0 * p.L2);
  m.A(2, 2) = -p.R2 / (2.0 * p.L2);
  return m;
}

/// Controllability decomposition of the tuned 5th-order linearization.
struct ModalReport {
  std::vector<std::string> state_names;
  Eigen::VectorXcd eigenvalues;                 ///< of the full A, sorted
  std::size_t rank = 0;                         ///< numerical Kalman rank
  Eigen::MatrixXd controllable_basis;           ///< n x rank, orthonormal
  Eigen::MatrixXd uncontrollable_basis;         ///< n x (n - rank)
  Eigen::VectorXcd uncontrollable_eigenvalues;  ///< spectrum on the complement
};

namespace detail {

inline Eigen::VectorXcd sorted_eigenvalues(const Eigen::MatrixXd& A) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(A);
  if (es.info() != Eigen::Success) throw NumericsError("eigenvalue iteration failed");
  Eigen::VectorXcd ev = es.eigenvalues();
  std::vector<std::complex<double>> v(ev.data(), ev.data() + ev.size());
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  for (Eigen::Index i = 0; i < ev.size(); ++i) ev(i) = v[static_cast<std::size_t>(i)];
  return ev;
}

}  // namespace detail

/// Builds the Kalman controllability matrix [B, AB, ..., A^(n-1)B] of the
/// tuned 5th-order linearization at `op`, takes its numerical rank from
/// the singular values (relative threshold 1e-8 — the tuned decomposition
/// makes the gap many orders of magnitude), and reports the dynamics
/// restricted to the orthogonal complement of the reachable subspace.
/// Each Kalman column is normalized to unit length before the SVD:
/// |A|^k grows the later blocks by many decades, and without the
/// normalization the B block (which alone carries some reachable
/// directions) can fall below a threshold referenced to the largest
/// singular value. Column scaling changes neither the column space nor
/// its rank.
inline ModalReport modal_analysis(const SystemParams& p, const OperatingPoint& op) {
  const Lti5 m = tuned5_linearization(p, op);
  const Eigen::MatrixXd A = m.A;
  const Eigen::MatrixXd B = m.B;
  const auto n = A.rows();

  Eigen::MatrixXd kalman(n, n * B.cols());
  Eigen::MatrixXd block = B;
  for (Eigen::Index k = 0; k < n; ++k) {
    kalman.middleCols(k * B.cols(), B.cols()) = block;
    block = A * block;
  }
  for (Eigen::Index c = 0; c < kalman.cols(); ++c) {
    const double len = kalman.col(c).norm();
    if (len > 0.0) kalman.col(c) /= len;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(kalman, Eigen::ComputeFullU);
  const Eigen::VectorXd sv = svd.singularValues();
  std::size_t rank = 0;
  if (sv.size() > 0 && sv(0) > 0.0) {
    const double threshold = 1e-8 * sv(0);
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      if (sv(i) > threshold) ++rank;
  }

  ModalReport rep;
  rep.state_names = {"IL1r", "IL1i", "IL2r", "IL2i", "V2"};
  rep.eigenvalues = detail::sorted_eigenvalues(A);
  rep.rank = rank;
  rep.controllable_basis = svd.matrixU().leftCols(static_cast<Eigen::Index>(rank));
  rep.uncontrollable_basis = svd.matrixU().rightCols(n - static_cast<Eigen::Index>(rank));
  if (rep.uncontrollable_basis.cols() > 0) {
    const Eigen::MatrixXd Au =
        rep.uncontrollable_basis.transpose() * A * rep.uncontrollable_basis;
    rep.uncontrollable_eigenvalues = detail::sorted_eigenvalues(Au);
  } else {
    rep.uncontrollable_eigenvalues.resize(0);
  }
  return rep;
}

namespace detail {

inline std::string format_g6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline std::string format_complex(std::complex<double> z) {
  std::string s = format_g6(z.real());
  s += (z.imag() < 0.0) ? " - j" : " + j";
  s += format_g6(std::abs(z.imag()));
  return s;
}

}  // namespace detail

/// Renders a modal report as the plain-text block emitted by the CLI.
inline std::string format_modal_report(const ModalReport& rep) {
  std::string out;
  out += "state order:";
  for (const auto& name : rep.state_names) out += " " + name;
  out += "\n";
  out += "eigenvalues (1/s):\n";
  for (Eigen::Index i = 0; i < rep.eigenvalues.size(); ++i)
    out += "  " + detail::format_complex(rep.eigenvalues(i)) + "\n";
  out += "controllability rank: " + std::to_string(rep.rank) + " of " +
         std::to_string(rep.state_names.size()) + "\n";
  auto print_basis = [&](const char* title, const Eigen::MatrixXd& basis) {
    out += title;
    out += (basis.cols() == 0) ? " (empty)\n" : "\n";
    for (Eigen::Index r = 0; r < basis.rows(); ++r) {
      out += "  " + rep.state_names[static_cast<std::size_t>(r)] + ":";
      for (Eigen::Index c = 0; c < basis.cols(); ++c)
        out += " " + detail::format_g6(basis(r, c));
      out += "\n";
    }
  };
  print_basis("controllable subspace basis (columns):", rep.controllable_basis);
  print_basis("uncontrollable subspace basis (columns):", rep.uncontrollable_basis);
  out += "uncontrollable eigenvalues (1/s):\n";
  for (Eigen::Index i = 0; i < rep.uncontrollable_eigenvalues.size(); ++i)
    out += "  " + detail::format_complex(rep.uncontrollable_eigenvalues(i)) + "\n";
  return out;
}

namespace detail {

/// Shared column layout of both step-response variants: the controllable
/// states plus the resonant-current envelopes they predict.
inline std::vector<std::string> step_response_columns() {
  return {"IL1r_A", "IL2i_A", "V2_V", "env_iL1_A", "env_iL2_A"};
}

inline Trajectory with_envelope_columns(const Trajectory& base) {
  Trajectory out(step_response_columns());
  const std::size_t c1 = base.column_index("IL1r_A");
  const std::size_t c2 = base.column_index("IL2i_A");
  const std::size_t c3 = base.column_index("V2_V");
  for (std::size_t r = 0; r < base.rows(); ++r) {
    const double i1 = base.value(r, c1);
    const double i2 = base.value(r, c2);
    const std::array<double, 5> row{i1, i2, base.value(r, c3),
                                    std::numbers::sqrt2 * std::abs(i1),
                                    std::numbers::sqrt2 * std::abs(i2)};
    out.push_row(base.time(r), std::span<const double>(row.data(), row.size()));
  }
  return out;
}

}  // namespace detail

/// Small-signal step response: one density steps from `from` to `to` at
/// t = 0 with the model sitting at its operating point, so the deviation
/// state starts at zero and the input deviation is the step size. Rows
/// report absolute quantities (operating point plus deviation).
inline Trajectory step_response(const LtiModel& m, ControlInput input, double from, double to,
                                double t_end, const StepControl& sc = StepControl{}) {
  check_density(from, "from");
  check_density(to, "to");
  const double delta = to - from;
  const int col = (input == ControlInput::d1) ? 0 : 1;
  const Eigen::Vector3d drive = m.B.col(col) * delta;
  auto rhs = [&m, &drive](const std::array<double, 3>& s, double, double) {
    const Eigen::Vector3d x(s[0], s[1], s[2]);
    const Eigen::Vector3d dx = m.A * x + drive;
    return std::array<double, 3>{dx(0), dx(1), dx(2)};
  };
  const Trajectory dev =
      integrate_schedule(rhs, std::array<double, 3>{0.0, 0.0, 0.0}, ControlSchedule::constant(0.0, 0.0),
                         t_end, sc, {"IL1r_A", "IL2i_A", "V2_V"});
  Trajectory abs_traj({"IL1r_A", "IL2i_A", "V2_V"});
  for (std::size_t r = 0; r < dev.rows(); ++r) {
    const std::array<double, 3> row{m.op.IL1r + dev.value(r, 0), m.op.IL2i + dev.value(r, 1),
                                    m.op.V2 + dev.value(r, 2)};
    abs_traj.push_row(dev.time(r), std::span<const double>(row.data(), row.size()));
  }
  return detail::with_envelope_columns(abs_traj);
}

/// Nonlinear step response: starts at the closed-form equilibrium for the
/// pre-step densities and integrates the controllable subsystem with the
/// stepped input, the other density held at `held`.
inline Trajectory step_response(const SystemParams& p, ControlInput input, double from,
                                double to, double held, double t_end,
                                const StepControl& sc = StepControl{}) {
  check_density(held, "held density");
  const double d1_pre = (input == ControlInput::d1) ? from : held;
  const double d2_pre = (input == ControlInput::d1) ? held : from;
  const double d1_post = (input == ControlInput::d1) ? to : held;
  const double d2_post = (input == ControlInput::d1) ? held : to;
  const OperatingPoint op = steady_state(p, d1_pre, d2_pre);
  const std::array<double, 3> x0{op.IL1r, op.IL2i, op.V2};
  const Trajectory base =
      integrate(PhasorModel::reduced3, std::span<const double>(x0.data(), x0.size()), p,
                ControlSchedule::constant(d1_post, d2_post), t_end, sc);
  return detail::with_envelope_columns(base);
}

}  // namespace wpt
