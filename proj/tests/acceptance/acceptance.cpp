// Acceptance checks, one per criterion. Each prints a single PASS/FAIL line
// with the measured values and the wall time against its budget.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spinforge/channels.hpp"
#include "spinforge/environment.hpp"
#include "spinforge/hyperfine.hpp"
#include "spinforge/locate.hpp"
#include "spinforge/qmat.hpp"
#include "spinforge/sequences.hpp"
#include "spinforge/units.hpp"

using namespace spinforge;

namespace {

const std::string kData = SPINFORGE_DATA_DIR;
constexpr double kDeg = 180.0 / M_PI;

struct Outcome {
  bool ok = true;
  std::ostringstream detail;

  // Records one sub-check; all must hold for the criterion to pass.
  void require(bool cond, const std::string& what) {
    ok = ok && cond;
    if (detail.tellp() > 0) detail << "; ";
    detail << what << (cond ? "" : " [miss]");
  }
};

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

bool within(double x, double target, double rel) { return std::abs(x - target) <= rel * std::abs(target); }

template <class T>
bool same_bytes(const std::vector<T>& a, const std::vector<T>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

Outcome resonance_position() {
  Outcome o;
  const double spacing = resonance_times(reference_params(), 0)[0];
  o.require(within(spacing, 0.875e-6, 0.01), fmt("2 tau0 = %.4f us (0.875 us +-1%%)", spacing * 1e6));
  return o;
}

Outcome rotation_per_pulse() {
  Outcome o;
  const auto p = reference_params();
  const double alpha = dd_block(p, gate_tau0(p)).alpha;
  const double closed = alpha_closed_form(p);
  o.require(std::abs(alpha * kDeg - 10.2) <= 0.3, fmt("alpha = %.3f deg (10.2 +- 0.3)", alpha * kDeg));
  o.require(within(closed, alpha, 0.02), fmt("closed form %.3f deg (within 2%%)", closed * kDeg));
  return o;
}

Outcome oracle_equivalence() {
  Outcome o;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> par(-120, 120), perp(0, 120), larmor(150, 1200), tau(0.05e-6, 3e-6);
  std::uniform_int_distribution<int> half(1, 16);
  double worst_xy = 0;
  for (int i = 0; i < 200; ++i) {
    const auto p = HyperfineParams::from_khz(par(rng), perp(rng), larmor(rng));
    const double t = tau(rng);
    const int n = 2 * half(rng);
    worst_xy = std::max(worst_xy, max_abs(xyn_propagator(p, t, n) - xyn_propagator_bruteforce(p, t, n)));
  }
  o.require(worst_xy < 1e-9, fmt("XY-N max deviation %.2e (< 1e-9)", worst_xy));

  std::normal_distribution<double> g(0, 1);
  std::uniform_real_distribution<double> ang(-2 * M_PI, 2 * M_PI);
  auto su2 = [](const AxisAngle& r) {
    const Vec3& a = r.axis();
    return expm_hermitian(0.5 * (a.x() * pauli::x() + a.y() * pauli::y() + a.z() * pauli::z()), r.angle());
  };
  double worst_q = 0;
  for (int i = 0; i < 1000; ++i) {
    const AxisAngle a(Vec3(g(rng), g(rng), g(rng)), ang(rng)), b(Vec3(g(rng), g(rng), g(rng)), ang(rng));
    worst_q = std::max(worst_q, phase_distance(su2(a) * su2(b), compose_axis_angle(a, b).matrix()));
  }
  o.require(worst_q < 1e-10, fmt("axis-angle composition max deviation %.2e (< 1e-10)", worst_q));
  return o;
}

Outcome signal_spectroscopy() {
  Outcome o;
  const auto p = reference_params();
  const auto c = precession(p);
  const auto grid = linspace(0, 1e-3, 4001);
  const auto s0 = fft_spectrum(ramsey_s0(p, grid, true));
  const auto sd = fft_spectrum(ramsey_sdelta(p, grid, true));
  const double bin = s0.freqs[1] - s0.freqs[0];
  const double f0 = s0.peak_frequency(), fd = sd.peak_frequency(0, 200e3);
  const double t0 = units::angular_to_hz(c.omega0()), td = units::angular_to_hz(c.omega_delta());
  o.require(std::abs(f0 - t0) <= bin, fmt("s0 peak %.2f kHz vs omega0 %.2f kHz", f0 / 1e3, t0 / 1e3));
  o.require(std::abs(fd - td) <= bin, fmt("s_delta peak %.2f kHz vs omega_delta %.2f kHz (bin %.3f kHz)", fd / 1e3,
                                          td / 1e3, bin / 1e3));
  return o;
}

Outcome cptp_suite() {
  Outcome o;
  const auto p = reference_params();
  const LarmorEnsemble ens;
  OpticalParams opt;
  const auto states = random_density_matrices(4, 50, 17);
  const std::vector<std::pair<const char*, QuantumChannel>> channels{
      {"swap", swap_channel(p, ens, 16.1e-6)},
      {"dephasing", electron_dephasing(5e-6, 16.1e-6)},
      {"excite-readout", excitation_channel(p, opt, ExciteBranch::Readout, ens)},
      {"excite-init", excitation_channel(p, opt, ExciteBranch::Init, ens)},
      {"pipeline-readout", pipeline_channel(p, opt, ExciteBranch::Readout, ens)},
      {"pipeline-init", pipeline_channel(p, opt, ExciteBranch::Init, ens)},
  };
  double worst_trace = 0, worst_choi = std::numeric_limits<double>::infinity();
  for (const auto& [name, ch] : channels) {
    worst_trace = std::max(worst_trace, ch.trace_error(states));
    worst_choi = std::min(worst_choi, ch.choi_min_eigenvalue());
  }
  o.require(worst_trace < 1e-8,
            fmt("%.0f channels, max trace error %.2e", static_cast<double>(channels.size()), worst_trace));
  o.require(worst_choi > -1e-8, fmt("min Choi eigenvalue %.2e", worst_choi));
  return o;
}

Outcome dephasing_formula() {
  Outcome o;
  const double g = 1.0 / 60e-6;
  const double one = dephasing_purity(0.56 * g, g, 1), many = dephasing_purity(0.0034 * g, g, 450);
  o.require(one >= 0.26 && one <= 0.30, fmt("single excitation %.4f in [0.26, 0.30]", one));
  o.require(std::abs(many - 0.90) <= 0.01, fmt("450 excitations %.4f (0.90 +- 0.01)", many));
  double worst = 0;
  for (double ratio : {0.0034, 0.05, 0.56, 2.0})
    for (int n = 0; n <= 20; ++n)
      worst = std::max(worst, std::abs(dephasing_purity(ratio * g, g, n) -
                                       dephasing_purity_iterated(2 * M_PI * ratio * g, g, n)));
  o.require(worst < 1e-10, fmt("iterated channel max deviation %.2e", worst));
  return o;
}

Outcome swap_fidelity() {
  Outcome o;
  const auto p = reference_params();
  const LarmorEnsemble ens;
  const double comp = swap_computational_fidelity(swap_channel(p, ens, 16.1e-6));
  const auto h = swap_experiment(p, OpticalParams(), ens, SwapExperimentConfig());
  o.require(std::abs(comp - 0.91) <= 0.03, fmt("computational fidelity %.4f (0.91 +- 0.03)", comp));
  o.require(std::abs(h.fidelity - 0.84) <= 0.03, fmt("retrieval fidelity %.4f (0.84 +- 0.03)", h.fidelity));

  // g-tensor sensitivity: excited-state coupling from the shipped tensors at the reference site
  const auto g = load_g_tensors(kData + "/g_tensor_er_yso.json");
  const auto settings = load_field_settings(kData + "/field_settings.json");
  OpticalParams with_excited;
  with_excited.excited =
      excited_hyperfine({20.0, 66.7, 49.6}, g, settings[0], constants::kGammaHydrogenHzPerT);
  const double alt = swap_experiment(p, with_excited, ens, SwapExperimentConfig()).fidelity;
  o.detail << fmt("; with excited-state coupling from the g-tensor file: retrieval %.4f", alt);
  return o;
}

Outcome t1_bound_check() {
  Outcome o;
  const double t1 = t1_bound(0.76, 0.84, 59.2e-3);
  o.require(within(t1, 0.59, 0.01), fmt("T1 bound %.4f s (0.59 s)", t1));
  o.require(std::abs(t1 - 0.63) > 0.03, fmt("differs from 0.63 s by %.3f s", std::abs(t1 - 0.63)));
  return o;
}

Outcome localization() {
  Outcome o;
  const auto g = load_g_tensors(kData + "/g_tensor_er_yso.json");
  const auto settings = load_field_settings(kData + "/field_settings.json");
  const double gamma = constants::kGammaHydrogenHzPerT;

  const Position truth{18.3, 72.0, 47.0};
  std::vector<Observation> synth;
  for (const auto& f : settings) {
    const auto m = model_observables(truth, g.ground, f.corrected_vector(), gamma);
    synth.push_back({f.id, m.omega0_khz, 0.5, m.omega_delta_khz, 0.5, m.alpha_deg, 0.3});
  }
  const int sign = model_a_par(truth, g.ground, settings[0], gamma) > 0 ? 1 : -1;
  const auto inv = localize(synth, settings, sign, SearchRegion{}, g.ground, gamma);
  const double dth = std::abs(std::remainder(inv.position.theta_deg - truth.theta_deg, 360.0));
  const double dph = std::abs(std::remainder(inv.position.phi_deg - truth.phi_deg, 360.0));
  o.require(std::abs(inv.position.r_angstrom - truth.r_angstrom) <= 0.1 && dth <= 0.5 && dph <= 0.5,
            fmt("(a) synthetic fit (%.2f A, %.2f deg, %.2f deg)", inv.position.r_angstrom, inv.position.theta_deg,
                inv.position.phi_deg) +
                " vs (18.3, 72, 47)");

  const auto obs = load_observations(kData + "/observations.json");
  const auto fit = localize(obs, settings, +1, SearchRegion{}, g.ground, gamma);
  const double th = std::abs(std::remainder(fit.position.theta_deg - 66.7, 360.0));
  const double ph = std::abs(std::remainder(fit.position.phi_deg - 49.6, 360.0));
  o.require(std::abs(fit.position.r_angstrom - 20.0) <= 0.5 && th <= 2 && ph <= 2,
            fmt("(b) observed fit (%.2f A, %.2f deg, %.2f deg)", fit.position.r_angstrom, fit.position.theta_deg,
                fit.position.phi_deg) +
                " vs (20.0, 66.7, 49.6)");
  o.require(std::abs(fit.reduced_chi2 - 2.7) <= 0.5,
            fmt("reduced chi2 %.3f with %d dof (2.7 +- 0.5)", fit.reduced_chi2, fit.dof));
  return o;
}

Outcome dark_spins() {
  Outcome o;
  const auto p = reference_params();
  const DarkSpinModel dark;
  const double tau0 = gate_tau0(p);
  const int n = entangling_pulse_count(p, tau0);
  const auto r = readout_points(dark, p, tau0, n);
  o.require(within(r.d2_insensitive_time, 62.6e-6, 0.01),
            fmt("d2-insensitive time %.2f us (62.6 +- 1%%)", r.d2_insensitive_time * 1e6));
  const double ph1 = branch_phase(dark.a1_hz, 72.19e-6, tau0, n) / M_PI;
  const double ph2 = branch_phase(dark.a1_hz, 73.14e-6, tau0, n) / M_PI;
  // "~0.7 pi" carries one significant figure
  o.require(std::abs(ph1 - 0.7) < 0.05 && std::abs(ph2 - 0.7) < 0.05,
            fmt("d1 phase %.3f pi / %.3f pi at 72.19 / 73.14 us", ph1, ph2));

  JumpTraceConfig cfg;
  cfg.readout_time = r.d1_readout_times[0];
  const auto tr = jump_trace(dark, p, cfg);
  const auto est = estimate_lifetime(tr);
  const double span_h = tr.sample_times.size() * cfg.sample_period / 3600.0;
  o.require(span_h >= 12.0 && within(est.t1, dark.t1_dark_1, 0.2),
            fmt("T1 %.1f s from a %.1f h trace (307.2 s +- 20%%)", est.t1, span_h));
  return o;
}

Outcome concentration() {
  Outcome o;
  const auto post = concentration_posterior(1, 6, 3e-9);
  const double analytic = std::log(6.0 / 5.0) / post.v_obs;
  o.require(within(post.mode, analytic, 1e-6) && within(post.mode, 1.6e18, 0.02),
            fmt("mode %.4e cm^-3 (ln(6/5)/V = %.4e)", post.mode, analytic));
  o.require(within(post.ci68.first, 0.3e18, 0.1) && within(post.ci68.second, 3.9e18, 0.1),
            fmt("central 68%% [%.3g, %.3g] cm^-3 vs [0.3, 3.9]e18", post.ci68.first, post.ci68.second));
  o.detail << fmt("; highest-density 68%% [%.3g, %.3g]", post.hpd68.first, post.hpd68.second);
  return o;
}

Outcome dipolar() {
  Outcome o;
  const double si = std::abs(dipolar_shift(1.5, 0, constants::kGHydrogen, constants::kGSilicon29));
  const double y = std::abs(dipolar_shift(2.4, 0, constants::kGHydrogen, constants::kGYttrium89));
  o.require(within(si, 7000, 0.15), fmt("H-Si 1.5 A: %.0f Hz (7 kHz +- 15%%)", si));
  o.require(within(y, 400, 0.15), fmt("H-Y 2.4 A: %.1f Hz (0.4 kHz +- 15%%)", y));
  return o;
}

Outcome determinism() {
  Outcome o;
  const auto p = reference_params();

  o.require(random_density_matrices(4, 20, 5) == random_density_matrices(4, 20, 5), "random states");

  NoiseModel noise;
  noise.sigma = calibrate_sigma(1.9e-3, 5e-3);
  noise.mc_samples = 200;
  const auto grid = linspace(0.1e-3, 3e-3, 12);
  o.require(same_bytes(nuclear_echo(p, EchoKind::cpmg(2), grid, noise).values,
                       nuclear_echo(p, EchoKind::cpmg(2), grid, noise).values),
            "echo Monte Carlo");

  const auto g = load_g_tensors(kData + "/g_tensor_er_yso.json");
  const auto settings = load_field_settings(kData + "/field_settings.json");
  const auto obs = load_observations(kData + "/observations.json");
  const Position pos{20.0, 66.7, 49.6};
  const double gamma = constants::kGammaHydrogenHzPerT;
  o.require(same_bytes(monte_carlo_sigma(pos, obs, settings, 5000, 11, g.ground, gamma),
                       monte_carlo_sigma(pos, obs, settings, 5000, 11, g.ground, gamma)),
            "Monte Carlo model sigma");
  LocateOptions lo;
  lo.mc_samples = 2000;
  const auto f1 = localize(obs, settings, +1, SearchRegion{}, g.ground, gamma, lo);
  const auto f2 = localize(obs, settings, +1, SearchRegion{}, g.ground, gamma, lo);
  o.require(std::memcmp(&f1.position, &f2.position, sizeof f1.position) == 0 && f1.chi2 == f2.chi2, "localization");

  SwapExperimentConfig sc;
  sc.n_loops = 300;
  const auto h1 = swap_experiment(p, OpticalParams(), LarmorEnsemble(), sc);
  const auto h2 = swap_experiment(p, OpticalParams(), LarmorEnsemble(), sc);
  o.require(h1.same_loop == h2.same_loop && h1.next_loop == h2.next_loop, "SWAP histogram");

  JumpTraceConfig jc;
  jc.n_samples = 500;
  const auto j1 = jump_trace(DarkSpinModel{}, p, jc), j2 = jump_trace(DarkSpinModel{}, p, jc);
  o.require(same_bytes(j1.populations, j2.populations) && j1.hidden_d1 == j2.hidden_d1, "jump trace");

  std::mt19937_64 r1(4), r2(4);
  o.require(same_bytes(telegraph_switch_times(60, 1e5, r1), telegraph_switch_times(60, 1e5, r2)), "telegraph");
  return o;
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all{
      {1, "resonance position", 1, resonance_position},
      {2, "rotation per pulse", 1, rotation_per_pulse},
      {3, "oracle equivalence", 10, oracle_equivalence},
      {4, "signal spectroscopy", 5, signal_spectroscopy},
      {5, "CPTP suite", 30, cptp_suite},
      {6, "dephasing formula", 5, dephasing_formula},
      {7, "SWAP fidelity", 300, swap_fidelity},
      {8, "T1 bound", 1, t1_bound_check},
      {9, "localization", 600, localization},
      {10, "dark spins", 120, dark_spins},
      {11, "concentration", 1, concentration},
      {12, "dipolar shift", 1, dipolar},
      {13, "determinism", 60, determinism},
  };
  return all;
}

bool run_one(const Criterion& c) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = c.run();
  } catch (const std::exception& e) {
    o.require(false, std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = secs <= c.budget_s;
  const bool pass = o.ok && in_time;
  std::printf("%s criterion %2d %s: %s (%.2f s of %.0f s)\n", pass ? "PASS" : "FAIL", c.id, c.name,
              o.detail.str().c_str(), secs, c.budget_s);
  std::fflush(stdout);
  return pass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  int which = 0;
  app.add_option("--criterion", which, "run one criterion (1-13); all when omitted")->check(CLI::Range(0, 13));
  CLI11_PARSE(app, argc, argv);

  int failed = 0;
  for (const auto& c : criteria())
    if (which == 0 || which == c.id) failed += run_one(c) ? 0 : 1;
  return failed == 0 ? 0 : 1;
}
