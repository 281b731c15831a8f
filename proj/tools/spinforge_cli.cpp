// spinforge command-line front end: one subcommand per data product.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "config.hpp"
#include "spinforge/channels.hpp"
#include "spinforge/environment.hpp"
#include "spinforge/locate.hpp"
#include "spinforge/parallel.hpp"
#include "spinforge/sequences.hpp"
#include "spinforge/units.hpp"

#ifndef SPINFORGE_VERSION
#define SPINFORGE_VERSION "0.0.0"
#endif
#ifndef SPINFORGE_DATA_DIR
#define SPINFORGE_DATA_DIR "data"
#endif

namespace fs = std::filesystem;
using namespace spinforge;
using cli::json;
using cli::Section;

namespace {

constexpr double kUs = 1e-6, kMs = 1e-3;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

// ------------------------------------------------------------------ output

class Emitter {
 public:
  Emitter(fs::path dir, std::string format, std::string command, const json& effective)
      : dir_(std::move(dir)), format_(std::move(format)), command_(std::move(command)) {
    meta_ = json::object();
    meta_["tool"] = "spinforge";
    meta_["version"] = SPINFORGE_VERSION;
    meta_["command"] = command_;
    meta_["config_hash"] = hex64(fnv1a(effective.dump()));
    fs::create_directories(dir_);
  }

  void table(const std::string& name, const std::vector<std::string>& cols,
             const std::vector<std::vector<double>>& data) {
    for (const auto& c : data)
      if (c.size() != data.front().size()) throw std::logic_error("ragged table " + name);
    if (format_ == "json") {
      json t = json::object();
      for (size_t k = 0; k < cols.size(); ++k) t[cols[k]] = data[k];
      tables_[name] = t;
      return;
    }
    std::ofstream out(dir_ / (name + ".csv"));
    out << "# spinforge " << SPINFORGE_VERSION << " command=" << command_
        << " config_hash=" << meta_["config_hash"].get<std::string>() << "\n";
    for (size_t k = 0; k < cols.size(); ++k) out << (k ? "," : "") << cols[k];
    out << "\n";
    const size_t rows = data.empty() ? 0 : data.front().size();
    for (size_t r = 0; r < rows; ++r) {
      for (size_t k = 0; k < cols.size(); ++k) out << (k ? "," : "") << fmt(data[k][r]);
      out << "\n";
    }
    files_.push_back((dir_ / (name + ".csv")).string());
  }

  // Summary always goes to <command>.json; in json format it also carries the tables.
  void finish(const json& summary) {
    json doc = json::object();
    doc["meta"] = meta_;
    doc["summary"] = summary;
    if (format_ == "json") doc["tables"] = tables_;
    const fs::path path = dir_ / (command_ + ".json");
    std::ofstream out(path);
    // meta first on its own line, then the payload
    out << "{\"meta\": " << meta_.dump() << ",\n";
    std::string body = doc.dump(2);
    const auto cut = body.find("\"summary\"");
    out << "  " << body.substr(cut) << "\n";
    files_.push_back(path.string());
    json report = summary;
    report["files"] = files_;
    std::cout << report.dump() << "\n";
  }

 private:
  fs::path dir_;
  std::string format_, command_;
  json meta_, tables_ = json::object();
  std::vector<std::string> files_;
};

// ------------------------------------------------------------------ config pieces

HyperfineParams read_hyperfine(Section& root) {
  auto s = root.section("hyperfine");
  const double a_par = s.number("a_par_khz", 19.4);
  const double a_perp = s.number("a_perp_khz", 50.5, [](double x) { return x >= 0; }, "must be >= 0");
  const double larmor = s.positive("larmor_khz", 567.4);
  s.finish();
  return HyperfineParams::from_khz(a_par, a_perp, larmor);
}

DarkSpinModel read_dark(Section& root) {
  auto s = root.section("dark_spins");
  DarkSpinModel d;
  auto nonneg = [](double x) { return x >= 0; };
  d.a1_hz = s.number("a1_hz", d.a1_hz, nonneg, "must be >= 0");
  d.a2_hz = s.number("a2_hz", d.a2_hz, nonneg, "must be >= 0");
  d.t1_dark_1 = s.positive("t1_dark_1_s", d.t1_dark_1);
  d.t1_dark_2 = s.positive("t1_dark_2_s", d.t1_dark_2);
  s.finish();
  return d;
}

std::string data_path(Section& s, const std::string& key, const std::string& file) {
  return s.text(key, (fs::path(SPINFORGE_DATA_DIR) / file).string());
}

std::vector<double> grid_from(Section& s, const std::string& prefix, double start, double stop, long points,
                              double unit) {
  const double a = s.number(prefix + "_start" + (unit == kUs ? "_us" : "_ms"), start,
                            [](double x) { return x >= 0; }, "must be >= 0");
  const double b = s.number(prefix + "_stop" + (unit == kUs ? "_us" : "_ms"), stop);
  const long n = s.integer("points", points, 2, 2000000);
  if (!(b > a)) throw ConfigError(s.key_path(prefix + "_stop"), "must exceed the start value");
  return linspace(a * unit, b * unit, static_cast<int>(n));
}

LarmorEnsemble ensemble_from(bool use, const DarkSpinModel& d) {
  return use ? LarmorEnsemble::from_dark_spins(d.a1_hz, d.a2_hz) : LarmorEnsemble::single();
}

// ------------------------------------------------------------------ commands

void cmd_spectrum(Section& root, Emitter& out, std::optional<int> n_override) {
  const auto p = read_hyperfine(root);
  auto s = root.section("spectrum");
  const int n = n_override ? *n_override : static_cast<int>(s.integer("n_pulses", 8, 2, 4096));
  if (n % 2) throw ConfigError("spectrum.n_pulses", "must be even");
  const auto grid = grid_from(s, "tau", 0.2, 0.8, 3001, kUs);
  s.finish();
  root.finish();
  const auto tr = xyn_spectrum(p, grid, n);
  std::vector<double> tau_us, spacing_us;
  for (double t : grid) tau_us.push_back(t / kUs), spacing_us.push_back(2 * t / kUs);
  out.table("spectrum", {"tau_us", "spacing_us", "population"}, {tau_us, spacing_us, tr.values});
  const auto refined = refine_resonance(p, 0);
  const auto blk = dd_block(p, 0.5 * refined.spacing);
  json sum;
  sum["n_pulses"] = n;
  sum["resonance_spacing_us"] = resonance_times(p, 0).front() / kUs;
  sum["refined_spacing_us"] = refined.spacing / kUs;
  sum["alpha_deg"] = units::rad_to_deg(blk.alpha);
  sum["alpha_closed_form_deg"] = units::rad_to_deg(alpha_closed_form(p));
  out.finish(sum);
}

void cmd_ramsey(Section& root, Emitter& out, std::optional<std::string> mode_override) {
  const auto p = read_hyperfine(root);
  auto s = root.section("ramsey");
  const std::string mode = mode_override ? *mode_override : s.text("mode", "s0", {"s0", "sdelta"});
  const auto grid = grid_from(s, "tau_c", 15.0, 100.0, 1701, kUs);
  const int pad = static_cast<int>(s.integer("zero_pad", 4, 1, 64));
  s.finish();
  root.finish();
  const bool sd = mode == "sdelta";
  const auto exact = sd ? ramsey_sdelta(p, grid, true) : ramsey_s0(p, grid, true);
  const auto closed = sd ? ramsey_sdelta(p, grid, false) : ramsey_s0(p, grid, false);
  std::vector<double> t_us;
  for (double t : grid) t_us.push_back(t / kUs);
  out.table("ramsey_" + mode, {"tau_c_us", "exact", "closed_form"}, {t_us, exact.values, closed.values});
  const auto spec = fft_spectrum(exact, pad);
  std::vector<double> f_khz;
  for (double f : spec.freqs) f_khz.push_back(f / 1e3);
  out.table("ramsey_" + mode + "_fft", {"frequency_khz", "amplitude"}, {f_khz, spec.amplitudes});
  const auto c = precession(p);
  json sum;
  sum["mode"] = mode;
  sum["peak_khz"] = spec.peak_frequency() / 1e3;
  sum["expected_khz"] = sd ? std::abs(units::angular_to_khz(c.omega_delta())) : units::angular_to_khz(c.omega0());
  sum["bin_khz"] = spec.freqs.size() > 1 ? (spec.freqs[1] - spec.freqs[0]) / 1e3 : 0.0;
  out.finish(sum);
}

void cmd_echo(Section& root, Emitter& out, std::optional<std::string> kind_override) {
  const auto p = read_hyperfine(root);
  const auto dark = read_dark(root);
  auto s = root.section("echo");
  const std::string kind_s = kind_override ? *kind_override : s.text("kind", "hahn", {"hahn", "cpmg"});
  const int n_pi = kind_s == "hahn" ? 1 : static_cast<int>(s.integer("n_pi", 2, 1, 1024));
  const double hahn_t2 = s.positive("hahn_t2_ms", 1.9) * kMs;
  NoiseModel noise;
  noise.tau_c = s.positive("tau_c_ms", noise.tau_c / kMs) * kMs;
  noise.mc_samples = static_cast<int>(s.integer("mc_samples", 0, 0, 10000000));
  noise.mc_steps = static_cast<int>(s.integer("mc_steps", noise.mc_steps, 10, 100000));
  const bool statics = s.flag("dark_spin_shifts", true);
  const auto grid = grid_from(s, "t", 0.0, 8.0, 401, kMs);
  noise.seed = static_cast<std::uint64_t>(root.integer("seed", 1, 0, std::numeric_limits<long>::max()));
  s.finish();
  root.finish();
  noise.sigma = calibrate_sigma(hahn_t2, noise.tau_c);
  if (statics) noise.static_shifts = LarmorEnsemble::from_dark_spins(dark.a1_hz, dark.a2_hz).detunings;
  const EchoKind kind{n_pi};
  const auto tr = nuclear_echo(p, kind, grid, noise);
  std::vector<double> t_ms;
  for (double t : grid) t_ms.push_back(t / kMs);
  out.table("echo_" + kind_s, {"total_time_ms", "signal"}, {t_ms, tr.values});
  json sum;
  sum["kind"] = kind_s;
  sum["n_pi"] = n_pi;
  sum["sigma_rad_s"] = noise.sigma;
  sum["t2_ms"] = echo_t2(kind, noise.sigma, noise.tau_c) / kMs;
  sum["hahn_t2_ms"] = echo_t2(EchoKind::hahn(), noise.sigma, noise.tau_c) / kMs;
  out.finish(sum);
}

ExcitedHyperfine excited_from_config(Section& s, const HyperfineParams& p) {
  auto e = s.section("excited");
  const std::string source = e.text("source", "g_tensor", {"g_tensor", "explicit", "ground"});
  ExcitedHyperfine ex;
  if (source == "explicit") {
    ex.a_par = units::khz_to_angular(e.number("a_par_khz", 0.0));
    ex.a_perp = units::khz_to_angular(e.number("a_perp_khz", 0.0, [](double x) { return x >= 0; }, "must be >= 0"));
    ex.azimuth = units::deg_to_rad(e.number("azimuth_deg", 0.0));
  } else if (source == "ground") {
    ex = {p.a_par, p.a_perp, 0.0};
  } else {
    const auto gs = load_g_tensors(data_path(e, "g_tensor_file", "g_tensor_er_yso.json"));
    const auto settings = load_field_settings(data_path(e, "settings_file", "field_settings.json"));
    const long id = e.integer("setting_id", 1, 0, 1000000);
    const Position pos{e.positive("r_angstrom", 20.0), e.number("theta_deg", 66.7), e.number("phi_deg", 49.6)};
    const FieldSetting* f = nullptr;
    for (const auto& x : settings)
      if (x.id == id) f = &x;
    if (!f) throw ConfigError(e.key_path("setting_id"), "no such field setting");
    ex = excited_hyperfine(pos, gs, *f, constants::kGammaHydrogenHzPerT);
  }
  e.finish();
  return ex;
}

void cmd_swap(Section& root, Emitter& out, std::optional<int> loops_override, bool control_flag) {
  const auto p = read_hyperfine(root);
  const auto dark = read_dark(root);
  auto s = root.section("swap");
  SwapExperimentConfig cfg;
  cfg.loop_pattern = s.bits("pattern", cfg.loop_pattern);
  cfg.n_loops = loops_override ? *loops_override : static_cast<int>(s.integer("n_loops", cfg.n_loops, 2, 100000000));
  cfg.control = control_flag || s.flag("control", false);
  const double t2_us = s.number("dephasing_t2_us", 16.1, [](double x) { return x >= 0; }, "must be >= 0 (0 disables)");
  cfg.dephasing_t2 = t2_us > 0 ? std::optional<double>(t2_us * kUs) : std::nullopt;
  cfg.optics = s.flag("optics", true);
  const bool use_ensemble = s.flag("dark_spin_ensemble", true);
  OpticalParams opt;
  {
    auto o = root.section("optics");
    opt.t1_op = o.positive("t1_op_us", opt.t1_op / kUs) * kUs;
    opt.t_window = o.positive("t_window_us", opt.t_window / kUs) * kUs;
    opt.p_flip = o.number("p_flip", opt.p_flip, [](double x) { return x >= 0 && x <= 1; }, "must lie in [0, 1]");
    opt.n_readout_pulses = static_cast<int>(o.integer("n_readout_pulses", opt.n_readout_pulses, 1, 1000000));
    opt.n_init_pulses = static_cast<int>(o.integer("n_init_pulses", opt.n_init_pulses, 1, 1000000));
    opt.excited = excited_from_config(s, p);
    o.finish();
  }
  cfg.seed = static_cast<std::uint64_t>(root.integer("seed", 1, 0, std::numeric_limits<long>::max()));
  s.finish();
  root.finish();
  const auto ens = ensemble_from(use_ensemble, dark);
  const auto h = swap_experiment(p, opt, ens, cfg);
  std::vector<double> i_col, m_col, same, next, p_same, p_next;
  for (int i = 0; i < 2; ++i)
    for (int m = 0; m < 2; ++m) {
      i_col.push_back(i);
      m_col.push_back(m);
      same.push_back(h.same_loop[i][m]);
      next.push_back(h.next_loop[i][m]);
      p_same.push_back(h.p_same[i][m]);
      p_next.push_back(h.p_next[i][m]);
    }
  out.table("swap_histogram", {"init", "readout", "count_same_loop", "count_next_loop", "p_same_loop", "p_next_loop"},
            {i_col, m_col, same, next, p_same, p_next});
  json sum;
  sum["n_loops"] = h.n_loops;
  sum["control"] = cfg.control;
  sum["retrieval_fidelity"] = h.fidelity;
  sum["control_fidelity"] = h.control_fidelity;
  sum["computational_fidelity"] = swap_computational_fidelity(swap_channel(p, ens, cfg.dephasing_t2));
  sum["excited_a_par_khz"] = units::angular_to_khz(opt.excited.a_par);
  sum["excited_a_perp_khz"] = units::angular_to_khz(opt.excited.a_perp);
  out.finish(sum);
}

void cmd_locate(Section& root, Emitter& out, std::optional<int> sign_override) {
  auto s = root.section("locate");
  const auto gs = load_g_tensors(data_path(s, "g_tensor_file", "g_tensor_er_yso.json"));
  const auto settings = load_field_settings(data_path(s, "settings_file", "field_settings.json"));
  const auto obs = load_observations(data_path(s, "observations_file", "observations.json"));
  const long sign_cfg = s.integer("sign_a_par", 1, -1, 1);
  const int sign = sign_override ? *sign_override : static_cast<int>(sign_cfg);
  if (sign == 0) throw ConfigError("locate.sign_a_par", "must be +1 or -1");
  // both branches unless one is requested
  LocateOptions lo;
  lo.mc_samples = static_cast<int>(s.integer("mc_samples", lo.mc_samples, 0, 100000000));
  lo.refinement_rounds = static_cast<int>(s.integer("refinement_rounds", lo.refinement_rounds, 0, 100));
  lo.nm_tolerance = s.positive("nm_tolerance", lo.nm_tolerance);
  SearchRegion reg;
  {
    auto r = s.section("region");
    reg.r_min = r.positive("r_min_angstrom", reg.r_min);
    reg.r_max = r.positive("r_max_angstrom", reg.r_max);
    reg.r_step = r.positive("r_step_angstrom", reg.r_step);
    reg.angle_step = r.positive("angle_step_deg", reg.angle_step);
    if (reg.r_max < reg.r_min) throw ConfigError(r.key_path("r_max_angstrom"), "must be >= r_min_angstrom");
    r.finish();
  }
  lo.seed = static_cast<std::uint64_t>(root.integer("seed", 7, 0, std::numeric_limits<long>::max()));
  s.finish();
  root.finish();
  const double gamma = constants::kGammaHydrogenHzPerT;
  std::vector<int> branches = sign_override ? std::vector<int>{sign} : std::vector<int>{1, -1};
  if (!sign_override && s.has("sign_a_par")) branches = {sign};
  json sum;
  json fits = json::array();
  for (int br : branches) {
    const auto res = localize(obs, settings, br, reg, gs.ground, gamma, lo);
    json fit;
    fit["sign_a_par"] = br;
    fit["r_angstrom"] = res.position.r_angstrom;
    fit["theta_deg"] = res.position.theta_deg;
    fit["phi_deg"] = res.position.phi_deg;
    fit["chi2"] = res.chi2;
    fit["dof"] = res.dof;
    fit["reduced_chi2"] = res.dof > 0 ? json(res.reduced_chi2) : json(nullptr);
    fit["converged"] = res.converged;
    fit["iterations"] = res.iterations;
    fit["sigma_model"] = res.sigma_model;
    json model = json::array();
    for (const auto& o : obs)
      for (const auto& f : settings) {
        if (f.id != o.setting_id) continue;
        const auto m = model_observables(res.position, gs.ground, f.corrected_vector(), gamma);
        model.push_back({{"setting_id", f.id},
                         {"omega0_khz", m.omega0_khz},
                         {"omega_delta_khz", m.omega_delta_khz},
                         {"alpha_deg", m.alpha_deg}});
      }
    fit["model_at_fit"] = model;
    fit["contour_residuals"] = contour_residuals(res.position, obs, settings, br, gs.ground);
    fits.push_back(fit);
    const auto contours = ratio_contours(obs, settings, br, gs.ground, 1.0);
    std::vector<double> cid, ct, cp;
    for (const auto& c : contours) cid.push_back(c.setting_id), ct.push_back(c.theta_deg), cp.push_back(c.phi_deg);
    out.table(br > 0 ? "locate_contours_plus" : "locate_contours_minus", {"setting_id", "theta_deg", "phi_deg"},
              {cid, ct, cp});
  }
  sum["fits"] = fits;
  out.finish(sum);
}

void cmd_darkspins(Section& root, Emitter& out, std::optional<std::string> sub_override) {
  const auto p = read_hyperfine(root);
  const auto dark = read_dark(root);
  auto s = root.section("darkspins");
  const std::string sub =
      sub_override ? *sub_override : s.text("subtask", "readout_points", {"branches", "readout_points", "jumps"});
  const double tau0 = gate_tau0(p);
  const int n = entangling_pulse_count(p, tau0);
  json sum;
  sum["subtask"] = sub;
  sum["tau0_us"] = tau0 / kUs;
  sum["cnote_pulses"] = n;
  if (sub == "branches") {
    const auto grid = grid_from(s, "tau_c", 15.0, 100.0, 1701, kUs);
    s.finish();
    root.finish();
    std::vector<std::vector<double>> cols;
    std::vector<double> t_us;
    for (double t : grid) t_us.push_back(t / kUs);
    cols.push_back(t_us);
    for (auto [d1, d2] : {std::pair{1, 1}, {1, -1}, {-1, 1}, {-1, -1}})
      cols.push_back(four_body_ramsey(p, dark, d1, d2, grid).values);
    out.table("darkspins_branches", {"tau_c_us", "s_pp", "s_pm", "s_mp", "s_mm"}, cols);
    const auto avg = four_body_average(p, dark, grid);
    const auto spec = fft_spectrum(avg);
    std::vector<double> f_khz;
    for (double f : spec.freqs) f_khz.push_back(f / 1e3);
    out.table("darkspins_fft", {"frequency_khz", "amplitude"}, {f_khz, spec.amplitudes});
  } else if (sub == "readout_points") {
    s.finish();
    root.finish();
    const auto r = readout_points(dark, p, tau0, n);
    sum["d2_insensitive_time_us"] = r.d2_insensitive_time / kUs;
    sum["d1_readout_times_us"] = {r.d1_readout_times[0] / kUs, r.d1_readout_times[1] / kUs};
    sum["d1_phase_over_pi"] = {r.d1_phase[0] / M_PI, r.d1_phase[1] / M_PI};
    sum["d2_readout_time_us"] = r.d2_readout_time / kUs;
    sum["d2_phase_over_pi"] = r.d2_phase / M_PI;
  } else {
    JumpTraceConfig cfg;
    cfg.n_samples = static_cast<int>(s.integer("n_samples", cfg.n_samples, 3, 100000000));
    cfg.sample_period = s.positive("sample_period_s", cfg.sample_period);
    cfg.readout_noise_sigma =
        s.number("readout_noise_sigma", -1.0, [](double x) { return x == -1.0 || x >= 0; }, "must be >= 0 or -1");
    const double rt = s.number("readout_time_us", -1.0, [](double x) { return x == -1.0 || x > 0; }, "must be > 0");
    cfg.seed = static_cast<std::uint64_t>(root.integer("seed", 1, 0, std::numeric_limits<long>::max()));
    s.finish();
    root.finish();
    cfg.readout_time = rt > 0 ? rt * kUs : readout_points(dark, p, tau0, n).d1_readout_times[0];
    const auto tr = jump_trace(dark, p, cfg);
    const auto est = estimate_lifetime(tr);
    std::vector<double> d1(tr.hidden_d1.begin(), tr.hidden_d1.end()), d2(tr.hidden_d2.begin(), tr.hidden_d2.end());
    out.table("darkspins_jumps", {"time_s", "population", "hidden_d1", "hidden_d2"},
              {tr.sample_times, tr.populations, d1, d2});
    out.table("darkspins_dwells", {"dwell_s"}, {est.dwell_times});
    sum["readout_time_us"] = cfg.readout_time / kUs;
    sum["t1_est_s"] = est.t1;
    sum["t1_ci68_s"] = {est.ci_low, est.ci_high};
    sum["t1_uncorrected_s"] = est.t1_uncorrected;
    sum["n_events"] = est.n_events;
    sum["threshold"] = est.threshold;
    sum["misclassification"] = est.misclassification;
    sum["low_confidence"] = est.low_confidence;
  }
  out.finish(sum);
}

void cmd_concentration(Section& root, Emitter& out, std::optional<int> n_arg, std::optional<int> m_arg,
                       std::optional<double> r_arg) {
  auto s = root.section("concentration");
  const int n = n_arg ? *n_arg : static_cast<int>(s.integer("n_obs", 1, 0, 1000000));
  const int m = m_arg ? *m_arg : static_cast<int>(s.integer("m_trials", 6, 0, 1000000));
  const double r = r_arg ? *r_arg : s.positive("r_obs_nm", 3.0) * 1e-9;
  const int points = static_cast<int>(s.integer("grid_points", 20001, 100, 10000000));
  s.finish();
  root.finish();
  if (n > m) throw ConfigError("concentration.n_obs", "must not exceed m_trials");
  const auto post = concentration_posterior(n, m, r, points);
  out.table("concentration_posterior", {"rho_cm3", "density", "cdf"}, {post.grid, post.density, post.cdf});
  json sum;
  sum["n_obs"] = n;
  sum["m_trials"] = m;
  sum["r_obs_m"] = r;
  sum["v_obs_cm3"] = post.v_obs;
  sum["mode"] = post.mode;
  sum["grid_mode"] = post.grid_mode;
  sum["ci68_central"] = {post.ci68.first, post.ci68.second};
  sum["ci68_hpd"] = {post.hpd68.first, post.hpd68.second};
  out.finish(sum);
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("--config", std::string("invalid JSON: ") + e.what());
  }
}

void print_error(const char* kind, const std::string& key, const std::string& message) {
  json e;
  e["error"] = kind;
  if (!key.empty()) e["key"] = key;
  e["message"] = message;
  std::cerr << e.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  parallel::configure_from_env();
  CLI::App app{"spinforge: electron-nuclear spin register simulator"};
  app.require_subcommand(1);
  std::string config_path, out_dir = "out", format = "csv";
  std::optional<long> seed;
  app.add_option("--config", config_path, "experiment config (JSON)");
  app.add_option("--seed", seed, "random seed override");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  std::optional<int> n_pulses, n_loops, sign, n_obs, m_trials;
  std::optional<std::string> mode, kind, subtask;
  std::optional<double> r_obs;
  bool control = false;
  auto* spectrum = app.add_subcommand("spectrum", "XY-N spectrum versus pulse spacing");
  spectrum->add_option("--n-pulses", n_pulses);
  auto* ramsey = app.add_subcommand("ramsey", "Ramsey signals s0 / s_delta and their FFT");
  ramsey->add_option("--mode", mode)->check(CLI::IsMember({"s0", "sdelta"}));
  auto* echo = app.add_subcommand("echo", "nuclear Hahn / CPMG echo decay");
  echo->add_option("--kind", kind)->check(CLI::IsMember({"hahn", "cpmg"}));
  auto* swap = app.add_subcommand("swap", "SWAP correlation experiment");
  swap->add_option("--n-loops", n_loops);
  swap->add_flag("--control", control, "replace the SWAP by identity");
  auto* locate = app.add_subcommand("locate", "chi^2 localization of the nuclear spin");
  locate->add_option("--sign", sign)->check(CLI::IsMember({-1, 1}));
  auto* darkspins = app.add_subcommand("darkspins", "dark-spin branches, readout points and jump traces");
  darkspins->add_option("--subtask", subtask)->check(CLI::IsMember({"branches", "readout_points", "jumps"}));
  auto* conc = app.add_subcommand("concentration", "hydrogen concentration posterior");
  conc->add_option("n", n_obs, "observations with a nucleus");
  conc->add_option("m", m_trials, "ions probed");
  conc->add_option("r_obs", r_obs, "observable radius (m)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("config", "argv", e.what());
    return 2;
  }

  try {
    json cfg = load_config(config_path);
    if (!cfg.is_object()) throw ConfigError("<root>", "config must be a JSON object");
    if (seed) cfg["seed"] = *seed;
    const std::string command = app.get_subcommands().front()->get_name();
    json effective = cfg;
    effective["__command"] = command;
    effective["__args"] = {n_pulses ? *n_pulses : 0, n_loops ? *n_loops : 0, sign ? *sign : 0,
                           mode.value_or(""),        kind.value_or(""),     subtask.value_or(""),
                           n_obs ? *n_obs : -1,      m_trials ? *m_trials : -1, r_obs ? *r_obs : -1.0,
                           control};
    Section root(&cfg, "");
    root.allow({"hyperfine", "dark_spins", "optics", "spectrum", "ramsey", "echo", "swap", "locate", "darkspins",
                "concentration", "seed"});
    Emitter out(out_dir, format, command, effective);
    if (command == "spectrum") cmd_spectrum(root, out, n_pulses);
    else if (command == "ramsey") cmd_ramsey(root, out, mode);
    else if (command == "echo") cmd_echo(root, out, kind);
    else if (command == "swap") cmd_swap(root, out, n_loops, control);
    else if (command == "locate") cmd_locate(root, out, sign);
    else if (command == "darkspins") cmd_darkspins(root, out, subtask);
    else cmd_concentration(root, out, n_obs, m_trials, r_obs);
  } catch (const ConfigError& e) {
    print_error("config", e.key(), e.what());
    return 2;
  } catch (const std::exception& e) {
    print_error("numerical", "", e.what());
    return 1;
  }
  return 0;
}
