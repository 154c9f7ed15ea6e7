///
/// Tests for envelope extraction, cycle averaging, sine-injection schedules,
/// and the frequency-response measurement.
///

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "wpt/analysis.hpp"
#include "wpt/params.hpp"
#include "wpt/signal.hpp"

#include "support.hpp"

using namespace wpt;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double kOmega = 5.76e6;
const double kTs = 2.0 * std::numbers::pi / kOmega;

/// Uniform grid with `per_cycle` samples per carrier period over `cycles`
/// periods.
std::vector<double> make_grid(std::size_t per_cycle, std::size_t cycles) {
  const double dt = kTs / static_cast<double>(per_cycle);
  std::vector<double> t(per_cycle * cycles);
  for (std::size_t k = 0; k < t.size(); ++k)
    t[k] = static_cast<double>(k) * dt;
  return t;
}

std::vector<double> sample(const std::vector<double>& t, auto f) {
  std::vector<double> x(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) x[k] = f(t[k]);
  return x;
}

}  // namespace

// ---------------------------------------------------------------------------
// Envelope extraction
// ---------------------------------------------------------------------------

TEST_CASE("envelope of a pure carrier tone is its amplitude") {
  const auto t = make_grid(128, 20);
  const auto x = sample(t, [](double tk) { return 3.0 * std::cos(kOmega * tk); });
  const Envelope env = extract_envelope(t, x, kOmega);

  REQUIRE(env.t.size() == 20);
  for (std::size_t c = 0; c < env.t.size(); ++c) {
    CHECK_THAT(env.amplitude[c], WithinRel(3.0, 1e-9));
    CHECK_THAT(env.phase[c], WithinAbs(0.0, 1e-9));
  }
  // Timestamps sit at the window centers.
  CHECK_THAT(env.t[0], WithinRel(0.5 * (t[0] + t[127]), 1e-12));
  CHECK_THAT(env.t[1], WithinRel(0.5 * (t[128] + t[255]), 1e-12));
}

TEST_CASE("envelope recovers amplitude and phase of a shifted tone") {
  const auto t = make_grid(128, 8);
  const auto x =
      sample(t, [](double tk) { return 2.5 * std::cos(kOmega * tk - 0.7); });
  const Envelope env = extract_envelope(t, x, kOmega);
  for (std::size_t c = 0; c < env.t.size(); ++c) {
    CHECK_THAT(env.amplitude[c], WithinRel(2.5, 1e-9));
    CHECK_THAT(env.phase[c], WithinAbs(-0.7, 1e-9));
  }
}

TEST_CASE("envelope ignores dc offsets and even harmonics") {
  const auto t = make_grid(128, 8);
  const auto clean =
      sample(t, [](double tk) { return 1.7 * std::cos(kOmega * tk + 0.3); });
  const auto dirty = sample(t, [](double tk) {
    return 1.7 * std::cos(kOmega * tk + 0.3) + 5.0 +
           1.5 * std::cos(2.0 * kOmega * tk + 1.0);
  });
  const Envelope a = extract_envelope(t, clean, kOmega);
  const Envelope b = extract_envelope(t, dirty, kOmega);
  for (std::size_t c = 0; c < a.t.size(); ++c) {
    CHECK_THAT(b.amplitude[c], WithinRel(a.amplitude[c], 1e-9));
    CHECK_THAT(b.phase[c], WithinAbs(a.phase[c], 1e-9));
  }
}

TEST_CASE("envelope of silence is zero") {
  const auto t = make_grid(64, 4);
  const std::vector<double> x(t.size(), 0.0);
  const Envelope env = extract_envelope(t, x, kOmega);
  for (const double a : env.amplitude) CHECK(a == 0.0);
}

TEST_CASE("envelope extraction validates its grid") {
  // Too few samples per period.
  {
    const auto t = make_grid(32, 8);
    const std::vector<double> x(t.size(), 1.0);
    CHECK_THROWS_AS(extract_envelope(t, x, kOmega), InputError);
  }
  // Less than two full periods.
  {
    const auto t = make_grid(128, 1);
    const std::vector<double> x(t.size(), 1.0);
    CHECK_THROWS_AS(extract_envelope(t, x, kOmega), InputError);
  }
  // Non-uniform spacing.
  {
    auto t = make_grid(128, 4);
    t[100] += 0.01 * (t[1] - t[0]);
    const std::vector<double> x(t.size(), 1.0);
    CHECK_THROWS_AS(extract_envelope(t, x, kOmega), InputError);
  }
  // Sample interval does not divide the carrier period.
  {
    const double dt = kTs / 64.5;
    std::vector<double> t(256);
    for (std::size_t k = 0; k < t.size(); ++k)
      t[k] = static_cast<double>(k) * dt;
    const std::vector<double> x(t.size(), 1.0);
    CHECK_THROWS_AS(extract_envelope(t, x, kOmega), InputError);
  }
  // Mismatched column lengths.
  {
    const auto t = make_grid(128, 4);
    const std::vector<double> x(t.size() - 1, 1.0);
    CHECK_THROWS_AS(extract_envelope(t, x, kOmega), InputError);
  }
}

TEST_CASE("cycle average reduces each period to its mean") {
  const auto t = make_grid(128, 6);
  const auto x = sample(
      t, [](double tk) { return 5.0 + 3.0 * std::cos(kOmega * tk); });
  const CycleAverage avg = cycle_average(t, x, kOmega);
  REQUIRE(avg.t.size() == 6);
  for (std::size_t c = 0; c < avg.t.size(); ++c)
    CHECK_THAT(avg.mean[c], WithinRel(5.0, 1e-9));
}

// ---------------------------------------------------------------------------
// Sine-injection schedules
// ---------------------------------------------------------------------------

TEST_CASE("sine schedule latches once per carrier cycle") {
  const double f = 1e4;
  const auto sched =
      sine_schedule(0.5, 0.4, ControlInput::d1, 0.1, f, 10.0 * kTs, kOmega);
  const auto& pts = sched.points();
  REQUIRE(pts.size() >= 10);

  // Breakpoints sit on the cycle grid.
  for (std::size_t k = 0; k < pts.size(); ++k)
    CHECK_THAT(pts[k].t, WithinAbs(static_cast<double>(k) * kTs, 1e-12));

  // Between breakpoints the density holds the value sampled at the cycle
  // start; the other channel never moves.
  const auto [d1_mid, d2_mid] = sched.densities_at(3.5 * kTs);
  CHECK_THAT(d1_mid,
             WithinRel(0.5 + 0.1 * std::sin(2.0 * std::numbers::pi * f *
                                            pts[3].t),
                       1e-9));
  CHECK(d2_mid == 0.4);
}

TEST_CASE("sine schedule rejects amplitudes that leave the unit interval") {
  CHECK_THROWS_AS(
      sine_schedule(0.95, 0.5, ControlInput::d1, 0.1, 1e4, 1e-4, kOmega),
      InputError);
  CHECK_THROWS_AS(
      sine_schedule(0.05, 0.5, ControlInput::d1, 0.1, 1e4, 1e-4, kOmega),
      InputError);
  CHECK_THROWS_AS(
      sine_schedule(0.5, 0.5, ControlInput::d1, -0.1, 1e4, 1e-4, kOmega),
      InputError);
  CHECK_THROWS_AS(
      sine_schedule(0.5, 0.5, ControlInput::d1, 0.1, 0.0, 1e-4, kOmega),
      InputError);
}

// ---------------------------------------------------------------------------
// Frequency-response measurement
// ---------------------------------------------------------------------------

TEST_CASE("injected-sine measurement matches the analytic response") {
  const SystemParams p = testutil::table_params();
  const LtiModel m = linearize(p, steady_state(p, 0.5, 0.5));
  const double f = 1e4;
  const double w = 2.0 * std::numbers::pi * f;

  for (const auto input : {ControlInput::d1, ControlInput::d2}) {
    const auto measured =
        measure_frequency_response(ResponseSystem::reduced3, input, f, p, 0.5, 0.5);
    const auto analytic = transfer_function(m, input, w);
    CHECK(std::abs(magnitude_db(measured) - magnitude_db(analytic)) < 0.5);
    const double dphase = std::remainder(
        (phase_deg(measured) - phase_deg(analytic)) * std::numbers::pi / 180.0,
        2.0 * std::numbers::pi);
    CHECK(std::abs(dphase) < 3.0 * std::numbers::pi / 180.0);
  }
}

TEST_CASE("measured gain is insensitive to the injection amplitude") {
  const SystemParams p = testutil::table_params();
  const double f = 2e4;
  FrequencyResponseOptions small;
  small.amplitude = 0.01;
  FrequencyResponseOptions large;
  large.amplitude = 0.02;
  const auto ga = measure_frequency_response(ResponseSystem::reduced3,
                                             ControlInput::d2, f, p, 0.5, 0.5, small);
  const auto gb = measure_frequency_response(ResponseSystem::reduced3,
                                             ControlInput::d2, f, p, 0.5, 0.5, large);
  CHECK_THAT(std::abs(ga), WithinRel(std::abs(gb), 0.01));
}

TEST_CASE("switched-oracle measurement agrees with the analytic response") {
  const SystemParams p = testutil::table_params();
  const LtiModel m = linearize(p, steady_state(p, 0.5, 0.5));
  const double f = 1e4;
  const auto measured = measure_frequency_response(ResponseSystem::switched,
                                                   ControlInput::d2, f, p, 0.5, 0.5);
  const auto analytic =
      transfer_function(m, ControlInput::d2, 2.0 * std::numbers::pi * f);
  CHECK(std::abs(magnitude_db(measured) - magnitude_db(analytic)) < 1.0);
  const double dphase = std::remainder(
      (phase_deg(measured) - phase_deg(analytic)) * std::numbers::pi / 180.0,
      2.0 * std::numbers::pi);
  CHECK(std::abs(dphase) < 5.0 * std::numbers::pi / 180.0);
}

TEST_CASE("measurement validates its inputs") {
  const SystemParams p = testutil::table_params();
  // Injection at or above half the switching frequency is rejected.
  CHECK_THROWS_AS(measure_frequency_response(ResponseSystem::reduced3,
                                             ControlInput::d1, 5e5, p, 0.5, 0.5),
                  InputError);
  CHECK_THROWS_AS(measure_frequency_response(ResponseSystem::reduced3,
                                             ControlInput::d1, 0.0, p, 0.5, 0.5),
                  InputError);

  FrequencyResponseOptions one_period;
  one_period.min_periods = 1;
  CHECK_THROWS_AS(measure_frequency_response(ResponseSystem::reduced3,
                                             ControlInput::d1, 1e4, p, 0.5, 0.5,
                                             one_period),
                  InputError);

  // Zero amplitude cannot excite anything and is rejected up front.
  FrequencyResponseOptions silent;
  silent.amplitude = 0.0;
  CHECK_THROWS_AS(measure_frequency_response(ResponseSystem::reduced3,
                                             ControlInput::d1, 1e4, p, 0.5, 0.5,
                                             silent),
                  InputError);
}

// ---------------------------------------------------------------------------
// Frequency grids
// ---------------------------------------------------------------------------

TEST_CASE("log-spaced grid hits its endpoints exactly") {
  const auto f = log_spaced(1e3, 1e5, 21);
  REQUIRE(f.size() == 21);
  CHECK(f.front() == 1e3);
  CHECK(f.back() == 1e5);
  for (std::size_t i = 1; i < f.size(); ++i) CHECK(f[i] > f[i - 1]);
  // Constant ratio between neighbours.
  const double ratio = f[1] / f[0];
  for (std::size_t i = 2; i < f.size(); ++i)
    CHECK_THAT(f[i] / f[i - 1], WithinRel(ratio, 1e-9));
}

TEST_CASE("log-spaced grid validates its arguments") {
  CHECK_THROWS_AS(log_spaced(1e4, 1e4, 5), InputError);
  CHECK_THROWS_AS(log_spaced(0.0, 1e4, 5), InputError);
  CHECK_THROWS_AS(log_spaced(1e3, 1e4, 1), InputError);
}
