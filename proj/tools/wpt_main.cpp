// Command-line front end: steady-state reports, time-domain simulation of
// the phasor models and the switched reference model, frequency-response
// sweeps, controllability reports, and envelope extraction, all driven by
// a key = value config file and CSV schedules.

#include <CLI11.hpp>
#include <algorithm>
#include <array>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "wpt/analysis.hpp"
#include "wpt/config.hpp"
#include "wpt/csv.hpp"
#include "wpt/errors.hpp"
#include "wpt/integrate.hpp"
#include "wpt/params.hpp"
#include "wpt/phasor.hpp"
#include "wpt/schedule.hpp"
#include "wpt/signal.hpp"
#include "wpt/switched.hpp"
#include "wpt/trajectory.hpp"

namespace {

using namespace wpt;

/// True when the config matches the bundled reference link, for which a
/// hardware measurement exists to print alongside the model values.
bool is_reference_link(const SystemParams& p) {
  auto near = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::abs(b); };
  return near(p.omega_s, 5.76e6) && near(p.L1, 75.2e-6) && near(p.L2, 75.2e-6) &&
         near(p.C1, 400e-12) && near(p.C2, 400e-12) && near(p.R1, 1.1) && near(p.R2, 1.1) &&
         near(p.M, 1.17e-6) && near(p.Cf, 1e-6) && near(p.RL, 21.4) && near(p.V1, 20.0);
}

PhasorModel parse_model(const std::string& name) {
  if (name == "full5") return PhasorModel::full5;
  if (name == "tuned5") return PhasorModel::tuned5;
  if (name == "reduced3") return PhasorModel::reduced3;
  if (name == "residual2") return PhasorModel::residual2;
  throw InputError("unknown model '" + name + "'");
}

ControlInput parse_input(const std::string& name) {
  if (name == "d1") return ControlInput::d1;
  if (name == "d2") return ControlInput::d2;
  throw InputError("input must be d1 or d2");
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = text.find(',', pos);
    const std::string cell = text.substr(pos, comma == std::string::npos ? comma : comma - pos);
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str() || *end != '\0')
      throw InputError("invalid number '" + cell + "' in state list");
    out.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

/// Resolves an --x0 specifier: "zero", "equilibrium" (at the schedule's
/// initial densities), "equilibrium:D1,D2", or an explicit comma list in
/// the model's state order.
std::vector<double> resolve_x0(const std::string& spec, const SystemParams& p,
                               const ControlSchedule& sched, std::size_t order,
                               bool switched_model) {
  if (spec == "zero") return std::vector<double>(order, 0.0);
  if (spec == "equilibrium" || spec.rfind("equilibrium:", 0) == 0) {
    double d1, d2;
    if (spec == "equilibrium") {
      std::tie(d1, d2) = sched.densities_at(0.0);
    } else {
      const auto ds = parse_number_list(spec.substr(std::string("equilibrium:").size()));
      if (ds.size() != 2) throw InputError("equilibrium:D1,D2 needs exactly two densities");
      d1 = ds[0];
      d2 = ds[1];
    }
    const OperatingPoint op = steady_state(p, d1, d2);
    if (switched_model) {
      const auto xc = circuit_state_from_phasors(p, op.IL1r, op.IL2i, op.V2);
      return std::vector<double>(xc.begin(), xc.end());
    }
    switch (order) {
      case 5:
        return {op.IL1r, 0.0, 0.0, op.IL2i, op.V2};
      case 3:
        return {op.IL1r, op.IL2i, op.V2};
      case 2:
        return {0.0, 0.0};  // the quadrature pair decays to the origin
      default:
        throw InputError("unsupported state dimension");
    }
  }
  const std::vector<double> x = parse_number_list(spec);
  if (x.size() != order)
    throw InputError("--x0 list has " + std::to_string(x.size()) + " entries, model needs " +
                     std::to_string(order));
  return x;
}

void cmd_steady(const std::string& config_path, double d1, double d2) {
  const SystemParams p = load_config(config_path);
  const OperatingPoint op = steady_state(p, d1, d2);
  std::cout << "operating point at d1 = " << format_sig9(d1) << ", d2 = " << format_sig9(d2)
            << " (V1 = " << format_sig9(p.V1) << " V):\n";
  std::cout << "  IL1r = " << format_sig9(op.IL1r) << " A\n";
  std::cout << "  IL2i = " << format_sig9(op.IL2i) << " A\n";
  std::cout << "  V2   = " << format_sig9(op.V2) << " V\n";
  if (is_reference_link(p) && d1 == 0.5 && d2 == 0.5)
    std::cout << "reference prototype measurement at this point: "
                 "IL1r 0.93 A, IL2i -1.16 A, V2 11.1 V\n";
}

void cmd_sim(const std::string& config_path, const std::string& model_name,
             const std::string& schedule_path, double d1, double d2, double t_end, double dt,
             bool adaptive, double rtol, const std::string& x0_spec, std::size_t record_every,
             const std::string& out_path) {
  const SystemParams p = load_config(config_path);
  const ControlSchedule sched = schedule_path.empty()
                                    ? ControlSchedule::constant(d1, d2)
                                    : load_schedule_csv(schedule_path);

  if (model_name == "switched") {
    if (adaptive) throw InputError("--adaptive applies to the phasor models only");
    SwitchedOptions opts;
    opts.dt = dt;  // 0 keeps the default Ts/512
    opts.record_every = record_every;
    const std::string spec = x0_spec.empty() ? "zero" : x0_spec;
    const std::vector<double> x0 = resolve_x0(spec, p, sched, 5, true);
    std::copy(x0.begin(), x0.end(), opts.x0.begin());
    simulate_switched(p, sched, t_end, opts).write_csv_file(out_path);
    return;
  }

  if (record_every != 1)
    throw InputError("--record-every applies to the switched model only");
  const PhasorModel model = parse_model(model_name);
  const StepControl sc =
      adaptive ? StepControl::adaptive(rtol) : StepControl::fixed(dt > 0.0 ? dt : 5e-7);
  const std::string spec = x0_spec.empty() ? "equilibrium" : x0_spec;
  const std::vector<double> x0 = resolve_x0(spec, p, sched, model_order(model), false);
  integrate(model, std::span<const double>(x0.data(), x0.size()), p, sched, t_end, sc)
      .write_csv_file(out_path);
}

void cmd_bode(const std::string& config_path, const std::string& input_name, double d1,
              double d2, double fmin, double fmax, std::size_t points,
              const std::string& source, double amplitude, const std::string& out_path) {
  const SystemParams p = load_config(config_path);
  const ControlInput input = parse_input(input_name);
  if (source != "analytic" && source != "nonlinear" && source != "switched")
    throw InputError("source must be analytic, nonlinear, or switched");
  const std::vector<double> grid = log_spaced(fmin, fmax, points);

  std::ofstream out(out_path);
  if (!out) throw InputError("cannot open output file '" + out_path + "'");
  out << "f_Hz,mag_dB,phase_deg,source\n";
  for (const double f : grid) {
    std::complex<double> g;
    if (source == "analytic") {
      const LtiModel m = linearize(p, steady_state(p, d1, d2));
      g = transfer_function(m, input, 2.0 * std::numbers::pi * f);
    } else {
      FrequencyResponseOptions opts;
      opts.amplitude = amplitude;
      const ResponseSystem sys =
          source == "nonlinear" ? ResponseSystem::reduced3 : ResponseSystem::switched;
      g = measure_frequency_response(sys, input, f, p, d1, d2, opts);
    }
    out << format_sig9(f) << ',' << format_sig9(magnitude_db(g)) << ','
        << format_sig9(phase_deg(g)) << ',' << source << '\n';
  }
}

void cmd_modes(const std::string& config_path, double d1, double d2) {
  const SystemParams p = load_config(config_path);
  const TunedReport tuned = validate_tuned(p);
  std::cout << "tuned condition: " << (tuned.pass ? "PASS" : "FAIL") << " (relative detune "
            << format_sig9(tuned.rel_detune1) << " / " << format_sig9(tuned.rel_detune2)
            << ", tolerance " << format_sig9(tuned.rel_tol) << ")\n";
  if (!tuned.pass)
    std::cout << "warning: resonances are off the switching frequency; the tuned-model "
                 "analysis below may not represent this link\n";
  const OperatingPoint op = steady_state(p, d1, d2);
  std::cout << format_modal_report(modal_analysis(p, op));
}

void cmd_envelope(const std::string& in_path, const std::string& column,
                  const std::string& config_path, double omega_s, const std::string& out_path) {
  double w = omega_s;
  if (!config_path.empty()) {
    if (omega_s > 0.0) throw InputError("give either --config or --omega-s, not both");
    w = load_config(config_path).omega_s;
  } else if (!(omega_s > 0.0)) {
    throw InputError("need --config or --omega-s to fix the carrier frequency");
  }
  const CsvTable csv = read_csv_file(in_path);
  const std::vector<double> t = csv.column("t_s");
  const std::vector<double> x = csv.column(column);
  extract_envelope(std::span<const double>(t), std::span<const double>(x), w)
      .to_trajectory()
      .write_csv_file(out_path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Modeling toolkit for tuned wireless power transfer links: "
               "dynamic-phasor models, a cycle-accurate switched reference "
               "model, and small-signal analysis"};
  app.require_subcommand(1);

  // steady
  std::string st_config;
  double st_d1 = 0.5, st_d2 = 0.5;
  auto* steady = app.add_subcommand("steady", "closed-form operating point for fixed densities");
  steady->add_option("--config", st_config, "parameter file")->required();
  steady->add_option("--d1", st_d1, "inverter pulse density");
  steady->add_option("--d2", st_d2, "rectifier pulse density");

  // sim
  std::string sm_config, sm_model, sm_schedule, sm_x0, sm_out;
  double sm_d1 = 0.5, sm_d2 = 0.5, sm_tend = 0.0, sm_dt = 0.0, sm_rtol = 1e-8;
  bool sm_adaptive = false;
  std::size_t sm_record = 1;
  auto* sim = app.add_subcommand("sim", "time-domain simulation to CSV");
  sim->add_option("--config", sm_config, "parameter file")->required();
  sim->add_option("--model", sm_model,
                  "full5 | tuned5 | reduced3 | residual2 | switched")
      ->required();
  sim->add_option("--schedule", sm_schedule, "t_s,d1,d2 schedule CSV");
  sim->add_option("--d1", sm_d1, "constant inverter density when no schedule is given");
  sim->add_option("--d2", sm_d2, "constant rectifier density when no schedule is given");
  sim->add_option("--t-end", sm_tend, "simulation span [s]")->required();
  sim->add_option("--dt", sm_dt, "fixed step [s]; default 5e-7 (phasor) or Ts/512 (switched)");
  sim->add_flag("--adaptive", sm_adaptive, "embedded 5(4) error-controlled stepping");
  sim->add_option("--rtol", sm_rtol, "relative tolerance with --adaptive");
  sim->add_option("--x0", sm_x0,
                  "zero | equilibrium | equilibrium:D1,D2 | comma-separated state");
  sim->add_option("--record-every", sm_record, "record every Nth step (switched model)");
  sim->add_option("--out", sm_out, "output CSV path")->required();

  // bode
  std::string bd_config, bd_input, bd_source = "analytic", bd_out;
  double bd_d1 = 0.5, bd_d2 = 0.5, bd_fmin = 1e3, bd_fmax = 1e5, bd_amp = 0.02;
  std::size_t bd_points = 121;
  auto* bode = app.add_subcommand("bode", "V2-over-density frequency response to CSV");
  bode->add_option("--config", bd_config, "parameter file")->required();
  bode->add_option("--input", bd_input, "d1 | d2")->required();
  bode->add_option("--d1", bd_d1, "operating inverter density");
  bode->add_option("--d2", bd_d2, "operating rectifier density");
  bode->add_option("--fmin", bd_fmin, "lowest frequency [Hz]");
  bode->add_option("--fmax", bd_fmax, "highest frequency [Hz]");
  bode->add_option("--points", bd_points, "number of log-spaced points");
  bode->add_option("--source", bd_source, "analytic | nonlinear | switched");
  bode->add_option("--amplitude", bd_amp, "injected density amplitude for measurements");
  bode->add_option("--out", bd_out, "output CSV path")->required();

  // modes
  std::string md_config;
  double md_d1 = 0.5, md_d2 = 0.5;
  auto* modes = app.add_subcommand("modes", "eigenvalues and controllability decomposition");
  modes->add_option("--config", md_config, "parameter file")->required();
  modes->add_option("--d1", md_d1, "operating inverter density");
  modes->add_option("--d2", md_d2, "operating rectifier density");

  // envelope
  std::string ev_in, ev_column, ev_config, ev_out;
  double ev_omega = 0.0;
  auto* envelope = app.add_subcommand("envelope", "carrier envelope of a waveform CSV column");
  envelope->add_option("--in", ev_in, "waveform CSV with a t_s column")->required();
  envelope->add_option("--column", ev_column, "column to demodulate")->required();
  envelope->add_option("--config", ev_config, "parameter file fixing omega_s");
  envelope->add_option("--omega-s", ev_omega, "carrier frequency [rad/s]");
  envelope->add_option("--out", ev_out, "output CSV path")->required();

  try {
    app.parse(argc, argv);
    if (steady->parsed()) cmd_steady(st_config, st_d1, st_d2);
    if (sim->parsed())
      cmd_sim(sm_config, sm_model, sm_schedule, sm_d1, sm_d2, sm_tend, sm_dt, sm_adaptive,
              sm_rtol, sm_x0, sm_record, sm_out);
    if (bode->parsed())
      cmd_bode(bd_config, bd_input, bd_d1, bd_d2, bd_fmin, bd_fmax, bd_points, bd_source,
               bd_amp, bd_out);
    if (modes->parsed()) cmd_modes(md_config, md_d1, md_d2);
    if (envelope->parsed()) cmd_envelope(ev_in, ev_column, ev_config, ev_omega, ev_out);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const wpt::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const wpt::NumericsError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
