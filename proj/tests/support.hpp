#pragma once

// Shared helpers for the test suite: the bundled reference parameter set,
// seeded random generators for property tests, error metrics, and a
// runner that drives the CLI binary and captures its output.

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "wpt/params.hpp"

namespace testutil {

/// The bundled reference link (same values as assets/tableI.cfg).
inline wpt::SystemParams table_params() {
  wpt::SystemParams p;
  p.omega_s = 5.76e6;
  p.L1 = 75.2e-6;
  p.L2 = 75.2e-6;
  p.C1 = 400e-12;
  p.C2 = 400e-12;
  p.R1 = 1.1;
  p.R2 = 1.1;
  p.M = 1.17e-6;
  p.Cf = 1e-6;
  p.RL = 21.4;
  p.V1 = 20.0;
  return p;
}

inline std::mt19937_64 make_rng(std::uint64_t seed = 0x77e1d00d) {
  return std::mt19937_64{seed};
}

inline double log_uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  return u(rng);
}

/// Random physically plausible parameter set with both tanks tuned
/// exactly to the switching frequency (C = 1/(omega_s^2 L)).
inline wpt::SystemParams random_tuned_params(std::mt19937_64& rng) {
  wpt::SystemParams p;
  p.omega_s = log_uniform(rng, 1e5, 2e7);
  p.L1 = log_uniform(rng, 1e-6, 1e-3);
  p.L2 = log_uniform(rng, 1e-6, 1e-3);
  p.C1 = 1.0 / (p.omega_s * p.omega_s * p.L1);
  p.C2 = 1.0 / (p.omega_s * p.omega_s * p.L2);
  p.R1 = log_uniform(rng, 0.05, 5.0);
  p.R2 = log_uniform(rng, 0.05, 5.0);
  p.M = uniform(rng, 0.02, 0.9) * std::sqrt(p.L1 * p.L2);
  p.Cf = log_uniform(rng, 1e-7, 1e-4);
  p.RL = log_uniform(rng, 1.0, 100.0);
  p.V1 = uniform(rng, 5.0, 100.0);
  return p;
}

inline double rel_err(double value, double reference) {
  return std::abs(value - reference) / std::abs(reference);
}

/// Root-mean-square of a vector of differences.
inline double rms(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return v.empty() ? 0.0 : std::sqrt(acc / static_cast<double>(v.size()));
}

struct CliResult {
  int exit_code = -1;
  std::string output;  ///< stdout and stderr interleaved
};

/// Runs the CLI binary with the given argument string.
inline CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string(WPT_CLI_BIN) + " " + args + " 2>&1";
  CliResult res;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return res;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof(buf), pipe)) res.output.append(buf, n);
  const int status = pclose(pipe);
  res.exit_code = (status >= 0 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
  return res;
}

}  // namespace testutil
